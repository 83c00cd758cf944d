#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gwhp {

/// Multi-channel float32 raster stored as
///
///   "GWHP" | version u16 | nx u16 | ny u16 | channels u8 |
///   channels x 16-byte ASCII name (NUL padded) |
///   channels x nx*ny little-endian float32, row-major
struct FieldContainer {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kNameBytes = 16;

  int nx = 0;
  int ny = 0;
  std::vector<std::string> names;
  std::vector<std::vector<float>> channels;

  void add(std::string name, std::span<const double> values);
  void add(std::string name, std::vector<float> values);
  /// Index of the named channel; throws CorruptFileError if missing.
  [[nodiscard]] std::size_t index_of(const std::string& name) const;
  [[nodiscard]] const std::vector<float>& channel(const std::string& name) const {
    return channels[index_of(name)];
  }
  [[nodiscard]] std::vector<double> channel_as_double(const std::string& name) const;
};

std::vector<std::uint8_t> encode_container(const FieldContainer& container);
/// Throws CorruptFileError on bad magic, truncation or trailing bytes and
/// VersionError on an unknown version.
FieldContainer decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const FieldContainer& container);
FieldContainer read_container(const std::filesystem::path& path);

/// Whole-file helpers shared by the model and container formats.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Little-endian byte sink / source used by the binary formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void text(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  [[nodiscard]] std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  std::string text(std::size_t n);
  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n);
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace gwhp

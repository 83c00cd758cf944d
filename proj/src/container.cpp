#include "gwhp/container.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "gwhp/error.hpp"

namespace gwhp {

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v & 0xFF));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteReader::need(std::size_t n) {
  if (remaining() < n) throw CorruptFileError(what_ + ": truncated data");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
  pos_ += 4;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::text(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

void FieldContainer::add(std::string name, std::span<const double> values) {
  std::vector<float> f(values.begin(), values.end());
  add(std::move(name), std::move(f));
}

void FieldContainer::add(std::string name, std::vector<float> values) {
  if (name.empty() || name.size() > kNameBytes) {
    throw ValidationError("container: channel name must have 1..16 characters");
  }
  if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)) {
    throw ValidationError("container: channel '" + name + "' has wrong length");
  }
  names.push_back(std::move(name));
  channels.push_back(std::move(values));
}

std::size_t FieldContainer::index_of(const std::string& name) const {
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == name) return c;
  }
  throw CorruptFileError("container: missing channel '" + name + "'");
}

std::vector<double> FieldContainer::channel_as_double(const std::string& name) const {
  const auto& c = channel(name);
  return {c.begin(), c.end()};
}

std::vector<std::uint8_t> encode_container(const FieldContainer& c) {
  if (c.nx < 1 || c.ny < 1 || c.nx > 0xFFFF || c.ny > 0xFFFF || c.names.size() > 0xFF ||
      c.names.size() != c.channels.size()) {
    throw ValidationError("container: dimensions or channel count out of range");
  }
  ByteWriter w;
  w.text("GWHP");
  w.u16(FieldContainer::kVersion);
  w.u16(static_cast<std::uint16_t>(c.nx));
  w.u16(static_cast<std::uint16_t>(c.ny));
  w.u8(static_cast<std::uint8_t>(c.names.size()));
  for (const auto& name : c.names) {
    std::string padded = name;
    padded.resize(FieldContainer::kNameBytes, '\0');
    w.text(padded);
  }
  for (const auto& channel : c.channels) {
    for (float v : channel) w.f32(v);
  }
  return w.take();
}

FieldContainer decode_container(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "field container");
  if (r.remaining() < 4 || r.text(4) != "GWHP") {
    throw CorruptFileError("field container: bad magic");
  }
  const auto version = r.u16();
  if (version != FieldContainer::kVersion) {
    throw VersionError("field container: unsupported version " + std::to_string(version));
  }
  FieldContainer c;
  c.nx = r.u16();
  c.ny = r.u16();
  const int count = r.u8();
  if (c.nx < 1 || c.ny < 1) throw CorruptFileError("field container: empty grid");
  for (int k = 0; k < count; ++k) {
    std::string name = r.text(FieldContainer::kNameBytes);
    name.resize(name.find('\0') == std::string::npos ? name.size() : name.find('\0'));
    c.names.push_back(std::move(name));
  }
  const auto n = static_cast<std::size_t>(c.nx) * static_cast<std::size_t>(c.ny);
  for (int k = 0; k < count; ++k) {
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    c.channels.push_back(std::move(values));
  }
  if (r.remaining() != 0) throw CorruptFileError("field container: trailing bytes");
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to '" + path.string() + "'");
}

void write_container(const std::filesystem::path& path, const FieldContainer& container) {
  write_file_bytes(path, encode_container(container));
}

FieldContainer read_container(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_container(bytes);
  } catch (const CorruptFileError& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  }
}

}  // namespace gwhp

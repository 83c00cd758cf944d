#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gwhp/container.hpp"
#include "gwhp/darcy.hpp"

namespace gwhp {

inline constexpr double kAmbientTemperature = 10.0;

/// Affine map value -> (value - center) / scale.
struct ChannelStats {
  double center = 0.0;
  double scale = 1.0;

  [[nodiscard]] double normalize(double v) const { return (v - center) / scale; }
  [[nodiscard]] double denormalize(double v) const { return v * scale + center; }
  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

/// Per-channel normalization; `t` applies to the temperature offset T - 10 C.
struct NormStats {
  ChannelStats qx;
  ChannelStats qy;
  ChannelStats t;

  /// Identity map (center 0, scale 1) on every channel.
  static NormStats identity() { return {}; }
  void validate() const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);

/// Extremes-based stats for one channel: center (max+min)/2, scale (max-min)/2,
/// scale 1 when the channel is constant.
ChannelStats fit_channel(std::span<const double> values);

/// Stats over all cells of all samples (T offset by the 10 C ambient).
NormStats fit_norm_stats(std::span<const Sample> samples);

/// Normalized velocity input (channel-major: qx plane then qy plane) and
/// normalized temperature-offset target.
struct TrainingPair {
  int nx = 0;
  int ny = 0;
  std::vector<double> input;
  std::vector<double> target;
  std::string source_id;
  int rotation = 0;  // degrees
  /// Some normalized value falls outside [-1, 1].
  bool out_of_range = false;

  [[nodiscard]] std::size_t plane() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// Stats over the raw (identity-normalized) pairs, e.g. after augmentation.
NormStats fit_norm_stats(std::span<const TrainingPair> raw_pairs);

TrainingPair preprocess(const Sample& sample, const NormStats& stats, std::string source_id = {});
/// Applies `stats` to a pair produced with identity stats.
TrainingPair normalize_pair(const TrainingPair& raw, const NormStats& stats);

/// Inverse of preprocess on the target: temperature in C.
std::vector<double> denormalize_target(std::span<const double> target, const NormStats& stats);
/// Inverse of preprocess on the input: (qx, qy) planes in m/s.
std::vector<double> denormalize_input(std::span<const double> input, const NormStats& stats);

/// Rotates a square field by 90 degrees counter-clockwise `quarter_turns`
/// times: out(n-1-j, i) = in(i, j) per turn.
std::vector<double> rotate_plane(std::span<const double> plane, int n, int quarter_turns);

/// Spatial rotation of all channels; velocity components co-rotate
/// (qx' = -qy, qy' = qx per quarter turn). Throws for non-square pairs.
TrainingPair augment_rotate(const TrainingPair& pair, int quarter_turns);

struct SplitConfig {
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  int test_count = 40;
  /// Extra rotated copies per training source (0..3).
  int augment_per_sample = 3;

  void validate() const;
};

void to_json(nlohmann::json& j, const SplitConfig& c);
void from_json(const nlohmann::json& j, SplitConfig& c);

struct DatasetSplit {
  std::vector<TrainingPair> train;
  std::vector<TrainingPair> validation;
  std::vector<TrainingPair> test;
  NormStats stats;
  std::vector<std::string> train_sources;
  std::vector<std::string> validation_sources;
  std::vector<std::string> test_sources;
};

/// Holds out `test_count` sources before augmentation, augments the rest,
/// assigns whole sources to validation, fits stats on the training pairs
/// only, and normalizes every split with them. `ids` names each sample.
DatasetSplit build_splits(std::span<const Sample> samples, std::span<const std::string> ids,
                          const SplitConfig& config);

/// Sample as a container with channels K, P, qx, qy, T.
FieldContainer to_container(const Sample& sample);
FieldContainer to_container(const TrainingPair& pair);

/// Writes `<dir>/<stem>.gwhp` and the sidecar `<dir>/<stem>.json`.
void save_sample(const std::filesystem::path& dir, const std::string& stem, const Sample& sample);
Sample load_sample(const std::filesystem::path& container_path);

/// Sample container files in `dir`, sorted by name.
std::vector<std::filesystem::path> list_samples(const std::filesystem::path& dir);

/// Every sample in `dir` with its file stem as id.
struct LoadedDataset {
  std::vector<Sample> samples;
  std::vector<std::string> ids;
};
LoadedDataset load_dataset(const std::filesystem::path& dir);

/// Scenario `index` of a dataset generated with `seed`.
ScenarioSpec scenario_for(std::uint64_t seed, int index, const GeologyConfig& geology = {});
/// File stem of scenario `index`.
std::string sample_stem(int index);

struct GenerateReport {
  int written = 0;
  std::vector<std::string> failures;  // "stem: message"
};

/// Simulates scenarios 0..count-1 on `workers` threads and saves them to
/// `dir`. Output depends only on (seed, index), not on the worker count.
GenerateReport generate_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed,
                                int workers, const GeologyConfig& geology = {});

}  // namespace gwhp

#include "gwhp/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"
#include "gwhp/random.hpp"

namespace gwhp {

void NormStats::validate() const {
  for (const auto* c : {&qx, &qy, &t}) {
    if (!(c->scale > 0.0) || !std::isfinite(c->center)) {
      throw ValidationError("norm stats: scale must be positive and center finite");
    }
  }
}

namespace {

nlohmann::json channel_json(const ChannelStats& c) {
  return {{"center", c.center}, {"scale", c.scale}};
}

ChannelStats channel_from(const nlohmann::json& j) {
  return {j.at("center").get<double>(), j.at("scale").get<double>()};
}

bool exceeds_unit(std::span<const double> values) {
  return std::any_of(values.begin(), values.end(),
                     [](double v) { return std::abs(v) > 1.0 + 1e-12; });
}

}  // namespace

void to_json(nlohmann::json& j, const NormStats& s) {
  j = nlohmann::json{{"qx", channel_json(s.qx)}, {"qy", channel_json(s.qy)}, {"t", channel_json(s.t)}};
}

void from_json(const nlohmann::json& j, NormStats& s) {
  NormStats out{channel_from(j.at("qx")), channel_from(j.at("qy")), channel_from(j.at("t"))};
  out.validate();
  s = out;
}

ChannelStats fit_channel(std::span<const double> values) {
  if (values.empty()) throw ValidationError("fit_channel: no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi == *lo) return {*lo, 1.0};
  return {0.5 * (*hi + *lo), 0.5 * (*hi - *lo)};
}

NormStats fit_norm_stats(std::span<const Sample> samples) {
  if (samples.empty()) throw ValidationError("fit_norm_stats: no samples");
  std::vector<double> qx;
  std::vector<double> qy;
  std::vector<double> t;
  for (const auto& s : samples) {
    qx.insert(qx.end(), s.velocity.x().begin(), s.velocity.x().end());
    qy.insert(qy.end(), s.velocity.y().begin(), s.velocity.y().end());
    for (double v : s.temperature.values()) t.push_back(v - kAmbientTemperature);
  }
  return {fit_channel(qx), fit_channel(qy), fit_channel(t)};
}

NormStats fit_norm_stats(std::span<const TrainingPair> raw_pairs) {
  if (raw_pairs.empty()) throw ValidationError("fit_norm_stats: no pairs");
  std::vector<double> qx;
  std::vector<double> qy;
  std::vector<double> t;
  for (const auto& p : raw_pairs) {
    const auto n = static_cast<std::ptrdiff_t>(p.plane());
    qx.insert(qx.end(), p.input.begin(), p.input.begin() + n);
    qy.insert(qy.end(), p.input.begin() + n, p.input.end());
    t.insert(t.end(), p.target.begin(), p.target.end());
  }
  return {fit_channel(qx), fit_channel(qy), fit_channel(t)};
}

TrainingPair preprocess(const Sample& sample, const NormStats& stats, std::string source_id) {
  stats.validate();
  const Grid& g = sample.temperature.grid();
  require_same_grid(g, sample.velocity.grid(), "preprocess");
  TrainingPair pair;
  pair.nx = g.nx;
  pair.ny = g.ny;
  pair.source_id = std::move(source_id);
  const std::size_t n = g.cell_count();
  pair.input.resize(2 * n);
  pair.target.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    pair.input[k] = stats.qx.normalize(sample.velocity.x()[k]);
    pair.input[n + k] = stats.qy.normalize(sample.velocity.y()[k]);
    pair.target[k] = stats.t.normalize(sample.temperature[k] - kAmbientTemperature);
  }
  pair.out_of_range = exceeds_unit(pair.input) || exceeds_unit(pair.target);
  return pair;
}

TrainingPair normalize_pair(const TrainingPair& raw, const NormStats& stats) {
  stats.validate();
  TrainingPair pair = raw;
  const std::size_t n = raw.plane();
  for (std::size_t k = 0; k < n; ++k) {
    pair.input[k] = stats.qx.normalize(raw.input[k]);
    pair.input[n + k] = stats.qy.normalize(raw.input[n + k]);
    pair.target[k] = stats.t.normalize(raw.target[k]);
  }
  pair.out_of_range = exceeds_unit(pair.input) || exceeds_unit(pair.target);
  return pair;
}

std::vector<double> denormalize_target(std::span<const double> target, const NormStats& stats) {
  std::vector<double> out(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    out[k] = stats.t.denormalize(target[k]) + kAmbientTemperature;
  }
  return out;
}

std::vector<double> denormalize_input(std::span<const double> input, const NormStats& stats) {
  const std::size_t n = input.size() / 2;
  std::vector<double> out(input.size());
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = stats.qx.denormalize(input[k]);
    out[n + k] = stats.qy.denormalize(input[n + k]);
  }
  return out;
}

std::vector<double> rotate_plane(std::span<const double> plane, int n, int quarter_turns) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  std::vector<double> current(plane.begin(), plane.end());
  std::vector<double> next(current.size());
  const auto un = static_cast<std::size_t>(n);
  for (int t = 0; t < turns; ++t) {
    for (std::size_t j = 0; j < un; ++j) {
      for (std::size_t i = 0; i < un; ++i) {
        next[i * un + (un - 1 - j)] = current[j * un + i];
      }
    }
    std::swap(current, next);
  }
  return current;
}

TrainingPair augment_rotate(const TrainingPair& pair, int quarter_turns) {
  if (pair.nx != pair.ny) throw ValidationError("augment_rotate: grid must be square");
  if (quarter_turns < 0 || quarter_turns > 3) {
    throw ValidationError("augment_rotate: quarter_turns must be in {0, 1, 2, 3}");
  }
  TrainingPair out = pair;
  const std::size_t n = pair.plane();
  for (int t = 0; t < quarter_turns; ++t) {
    std::span<const double> qx(out.input.data(), n);
    std::span<const double> qy(out.input.data() + n, n);
    std::vector<double> neg_qy(qy.begin(), qy.end());
    for (auto& v : neg_qy) v = -v;
    auto new_qx = rotate_plane(neg_qy, pair.nx, 1);
    auto new_qy = rotate_plane(qx, pair.nx, 1);
    std::copy(new_qx.begin(), new_qx.end(), out.input.begin());
    std::copy(new_qy.begin(), new_qy.end(), out.input.begin() + static_cast<std::ptrdiff_t>(n));
    out.target = rotate_plane(out.target, pair.nx, 1);
  }
  out.rotation = (pair.rotation + 90 * quarter_turns) % 360;
  return out;
}

void SplitConfig::validate() const {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ValidationError("split: val_fraction must be in [0, 1)");
  }
  if (test_count < 0) throw ValidationError("split: test_count must be >= 0");
  if (augment_per_sample < 0 || augment_per_sample > 3) {
    throw ValidationError("split: augment_per_sample must be in 0..3");
  }
}

void to_json(nlohmann::json& j, const SplitConfig& c) {
  j = nlohmann::json{{"seed", c.seed},
                     {"val_fraction", c.val_fraction},
                     {"test_count", c.test_count},
                     {"augment_per_sample", c.augment_per_sample}};
}

void from_json(const nlohmann::json& j, SplitConfig& c) {
  SplitConfig out;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") out.seed = value.get<std::uint64_t>();
    else if (key == "val_fraction") out.val_fraction = value.get<double>();
    else if (key == "test_count") out.test_count = value.get<int>();
    else if (key == "augment_per_sample") out.augment_per_sample = value.get<int>();
    else throw ValidationError("split: unknown key '" + key + "'");
  }
  out.validate();
  c = out;
}

DatasetSplit build_splits(std::span<const Sample> samples, std::span<const std::string> ids,
                          const SplitConfig& config) {
  config.validate();
  if (ids.size() != samples.size()) throw ValidationError("build_splits: one id per sample required");
  const auto count = samples.size();
  if (static_cast<std::size_t>(config.test_count) >= count) {
    throw ValidationError("build_splits: test_count " + std::to_string(config.test_count) +
                          " leaves no training samples out of " + std::to_string(count));
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  const auto test_end = static_cast<std::size_t>(config.test_count);
  const std::size_t pool = count - test_end;
  auto val_count = static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(pool)));
  val_count = std::min(val_count, pool - 1);

  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_end));
  std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(test_end),
                                   order.begin() + static_cast<std::ptrdiff_t>(test_end + val_count));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(test_end + val_count),
                                     order.end());
  for (auto* v : {&test_idx, &val_idx, &train_idx}) std::sort(v->begin(), v->end());

  const NormStats identity = NormStats::identity();
  auto augmented = [&](const std::vector<std::size_t>& idx) {
    std::vector<TrainingPair> raw;
    for (std::size_t s : idx) {
      TrainingPair base = preprocess(samples[s], identity, ids[s]);
      std::array<int, 3> turns{1, 2, 3};
      rng.shuffle(std::span<int>(turns));
      raw.push_back(base);
      for (int a = 0; a < config.augment_per_sample; ++a) {
        raw.push_back(augment_rotate(base, turns[static_cast<std::size_t>(a)]));
      }
    }
    return raw;
  };

  const std::vector<TrainingPair> raw_train = augmented(train_idx);
  const std::vector<TrainingPair> raw_val = augmented(val_idx);

  DatasetSplit split;
  split.stats = fit_norm_stats(raw_train);
  for (const auto& p : raw_train) split.train.push_back(normalize_pair(p, split.stats));
  for (const auto& p : raw_val) split.validation.push_back(normalize_pair(p, split.stats));
  for (std::size_t s : test_idx) split.test.push_back(preprocess(samples[s], split.stats, ids[s]));
  for (std::size_t s : train_idx) split.train_sources.push_back(ids[s]);
  for (std::size_t s : val_idx) split.validation_sources.push_back(ids[s]);
  for (std::size_t s : test_idx) split.test_sources.push_back(ids[s]);
  return split;
}

FieldContainer to_container(const Sample& sample) {
  const Grid& g = sample.temperature.grid();
  FieldContainer c;
  c.nx = g.nx;
  c.ny = g.ny;
  c.add("K", sample.permeability.values());
  c.add("P", sample.pressure.values());
  c.add("qx", sample.velocity.x());
  c.add("qy", sample.velocity.y());
  c.add("T", sample.temperature.values());
  return c;
}

FieldContainer to_container(const TrainingPair& pair) {
  FieldContainer c;
  c.nx = pair.nx;
  c.ny = pair.ny;
  const auto n = static_cast<std::ptrdiff_t>(pair.plane());
  c.add("qx", std::span<const double>(pair.input.data(), static_cast<std::size_t>(n)));
  c.add("qy", std::span<const double>(pair.input.data() + n, static_cast<std::size_t>(n)));
  c.add("T", pair.target);
  return c;
}

void save_sample(const std::filesystem::path& dir, const std::string& stem, const Sample& sample) {
  write_container(dir / (stem + ".gwhp"), to_container(sample));
  const nlohmann::json sidecar{
      {"format", "gwhp-sample"},
      {"schema_version", 1},
      {"scenario", sample.spec},
      {"stats",
       {{"steps", sample.stats.steps},
        {"simulated_seconds", sample.stats.simulated_seconds},
        {"last_max_change", sample.stats.last_max_change},
        {"steady", sample.stats.steady}}}};
  const std::string text = sidecar.dump(2) + "\n";
  write_file_bytes(dir / (stem + ".json"),
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Sample load_sample(const std::filesystem::path& container_path) {
  const FieldContainer c = read_container(container_path);
  auto sidecar_path = container_path;
  sidecar_path.replace_extension(".json");
  std::ifstream in(sidecar_path);
  if (!in) throw ValidationError("missing sidecar '" + sidecar_path.string() + "'");
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(sidecar_path.string() + ": " + e.what());
  }
  Sample s;
  s.spec = sidecar.at("scenario").get<ScenarioSpec>();
  const Grid& g = s.spec.grid;
  if (g.nx != c.nx || g.ny != c.ny) {
    throw CorruptFileError(container_path.string() + ": grid disagrees with sidecar");
  }
  s.permeability = ScalarField(g, c.channel_as_double("K"), "m2/(Pa s)");
  s.pressure = ScalarField(g, c.channel_as_double("P"), "Pa");
  s.velocity = VectorField(g, c.channel_as_double("qx"), c.channel_as_double("qy"), "m/s");
  s.temperature = ScalarField(g, c.channel_as_double("T"), "C");
  const auto& st = sidecar.at("stats");
  s.stats.steps = st.at("steps").get<int>();
  s.stats.simulated_seconds = st.at("simulated_seconds").get<double>();
  s.stats.last_max_change = st.at("last_max_change").get<double>();
  s.stats.steady = st.at("steady").get<bool>();
  return s;
}

std::vector<std::filesystem::path> list_samples(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("not a directory: '" + dir.string() + "'");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".gwhp") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gwhp

#include "gwhp/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gwhp/container.hpp"
#include "gwhp/error.hpp"
#include "gwhp/random.hpp"

namespace gwhp {

namespace {

constexpr char kMagic[4] = {'G', 'W', 'N', 'N'};
constexpr std::uint64_t kBatchOrderStream = 0x7a11;

// Training pairs packed as contiguous float batches in the network layout.
struct PackedPairs {
  std::size_t count = 0;
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  std::vector<float> input;
  std::vector<float> target;
};

PackedPairs pack(std::span<const TrainingPair> pairs, const nn::UNet<float>& net) {
  PackedPairs p;
  p.count = pairs.size();
  p.in_size = net.sample_input_size();
  p.out_size = net.sample_output_size();
  p.input.reserve(p.count * p.in_size);
  p.target.reserve(p.count * p.out_size);
  for (const auto& pair : pairs) {
    if (pair.input.size() != p.in_size || pair.target.size() != p.out_size) {
      throw ValidationError("training pair '" + pair.source_id + "' does not match the model's " +
                            std::to_string(net.config().input_size) + "x" +
                            std::to_string(net.config().input_size) + " shape");
    }
    for (double v : pair.input) p.input.push_back(static_cast<float>(v));
    for (double v : pair.target) p.target.push_back(static_cast<float>(v));
  }
  return p;
}

// Sum of squared errors over the given pair indices; grad (if non-null)
// receives d(mean)/d(output).
double batch_error(const nn::UNet<float>& net, const PackedPairs& data,
                   std::span<const std::size_t> indices, nn::Workspace<float>& ws,
                   std::vector<float>& xb, std::vector<float>& yb, std::vector<float>* grad) {
  const std::size_t b = indices.size();
  xb.resize(b * data.in_size);
  yb.resize(b * data.out_size);
  for (std::size_t k = 0; k < b; ++k) {
    std::copy_n(data.input.begin() + static_cast<std::ptrdiff_t>(indices[k] * data.in_size),
                data.in_size, xb.begin() + static_cast<std::ptrdiff_t>(k * data.in_size));
  }
  net.forward(xb, static_cast<int>(b), yb, ws);
  double sse = 0.0;
  const double scale = 2.0 / static_cast<double>(b * data.out_size);
  if (grad != nullptr) grad->resize(yb.size());
  for (std::size_t k = 0; k < b; ++k) {
    const float* t = data.target.data() + indices[k] * data.out_size;
    for (std::size_t i = 0; i < data.out_size; ++i) {
      const std::size_t at = k * data.out_size + i;
      const double d = static_cast<double>(yb[at]) - t[i];
      sse += d * d;
      if (grad != nullptr) (*grad)[at] = static_cast<float>(scale * d);
    }
  }
  return sse;
}

double mean_loss(const nn::UNet<float>& net, const PackedPairs& data, int batch_size) {
  if (data.count == 0) return 0.0;
  nn::Workspace<float> ws;
  std::vector<float> xb;
  std::vector<float> yb;
  std::vector<std::size_t> idx(data.count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double sse = 0.0;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < data.count; start += bs) {
    const std::size_t n = std::min(bs, data.count - start);
    sse += batch_error(net, data, std::span<const std::size_t>(idx).subspan(start, n), ws, xb, yb,
                       nullptr);
  }
  return sse / static_cast<double>(data.count * data.out_size);
}

}  // namespace

SurrogateModel::SurrogateModel(ModelConfig config, NormStats stats)
    : net_(std::move(config)), stats_(stats) {
  stats_.validate();
}

void SurrogateModel::set_norm_stats(const NormStats& stats) {
  stats.validate();
  stats_ = stats;
}

SurrogateModel build_model(const ModelConfig& config, std::uint64_t seed) {
  SurrogateModel model(config, NormStats::identity());
  model.network().initialize(seed);
  return model;
}

std::vector<float> forward(const SurrogateModel& model, std::span<const float> input) {
  const auto& net = model.network();
  if (input.size() != net.sample_input_size()) {
    const int n = model.config().input_size;
    throw ValidationError("forward: expected " + std::to_string(model.config().in_channels) + "x" +
                          std::to_string(n) + "x" + std::to_string(n) + " input (" +
                          std::to_string(net.sample_input_size()) + " values), got " +
                          std::to_string(input.size()));
  }
  std::vector<float> out(net.sample_output_size());
  nn::Workspace<float> ws;
  net.forward(input, 1, out, ws);
  return out;
}

std::vector<float> forward(const SurrogateModel& model, std::span<const double> input) {
  std::vector<float> x(input.begin(), input.end());
  return forward(model, std::span<const float>(x));
}

ScalarField infer(const SurrogateModel& model, const VectorField& velocity) {
  const Grid& g = velocity.grid();
  const int n = model.config().input_size;
  if (g.nx != n || g.ny != n) {
    throw ValidationError("infer: model expects a " + std::to_string(n) + "x" + std::to_string(n) +
                          " grid, got " + std::to_string(g.nx) + "x" + std::to_string(g.ny));
  }
  if (model.config().in_channels != 2 || model.config().out_channels != 1) {
    throw ValidationError("infer: model must map 2 velocity channels to 1 temperature channel");
  }
  const auto& s = model.norm_stats();
  const std::size_t cells = g.cell_count();
  std::vector<float> x(2 * cells);
  for (std::size_t k = 0; k < cells; ++k) {
    x[k] = static_cast<float>(s.qx.normalize(velocity.x()[k]));
    x[cells + k] = static_cast<float>(s.qy.normalize(velocity.y()[k]));
  }
  const auto y = forward(model, std::span<const float>(x));
  std::vector<double> t(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    t[k] = s.t.denormalize(static_cast<double>(y[k])) + kAmbientTemperature;
  }
  return ScalarField(g, std::move(t));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("train: learning_rate must be > 0");
  }
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (checkpoint_every < 0) throw ValidationError("train: checkpoint_every must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig out;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") out.learning_rate = value.get<double>();
    else if (key == "batch_size") out.batch_size = value.get<int>();
    else if (key == "epochs") out.epochs = value.get<int>();
    else if (key == "seed") out.seed = value.get<std::uint64_t>();
    else if (key == "checkpoint_every") out.checkpoint_every = value.get<int>();
    else throw ValidationError("train: unknown key '" + key + "'");
  }
  out.validate();
  c = out;
}

void to_json(nlohmann::json& j, const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                      {"validation_loss", e.validation_loss}});
  }
  j = nlohmann::json{{"epochs", epochs},
                     {"best_epoch", h.best_epoch},
                     {"best_validation_loss", h.best_validation_loss},
                     {"selected_on_train", h.selected_on_train}};
}

double evaluate_loss(const SurrogateModel& model, std::span<const TrainingPair> pairs,
                     int batch_size) {
  if (batch_size < 1) throw ValidationError("evaluate_loss: batch_size must be >= 1");
  return mean_loss(model.network(), pack(pairs, model.network()), batch_size);
}

TrainResult train(const SurrogateModel& initial, const DatasetSplit& split, const TrainConfig& tc,
                  const TrainHooks& hooks) {
  tc.validate();
  if (split.train.empty()) throw ValidationError("train: the training split is empty");

  SurrogateModel model = initial;
  model.set_norm_stats(split.stats);
  auto& net = model.network();
  const PackedPairs train_data = pack(split.train, net);
  const PackedPairs val_data = pack(split.validation, net);
  const bool on_train = val_data.count == 0;

  TrainHistory history;
  history.selected_on_train = on_train;
  auto selection_loss = [&](const EpochRecord& r) { return on_train ? r.train_loss : r.validation_loss; };

  EpochRecord start{0, mean_loss(net, train_data, tc.batch_size),
                    mean_loss(net, val_data, tc.batch_size)};
  history.epochs.push_back(start);
  if (hooks.on_epoch) hooks.on_epoch(start);
  SurrogateModel best = model;
  history.best_epoch = 0;
  history.best_validation_loss = selection_loss(start);

  nn::Adam adam(net.parameter_count(), nn::AdamConfig{tc.learning_rate});
  nn::Workspace<float> ws;
  std::vector<float> xb;
  std::vector<float> yb;
  std::vector<float> grad;
  std::vector<std::size_t> order(train_data.count);
  const auto bs = static_cast<std::size_t>(tc.batch_size);

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(mix_seed(tc.seed, kBatchOrderStream), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));

    double sse = 0.0;
    int batch_id = 0;
    for (std::size_t start_at = 0; start_at < order.size(); start_at += bs, ++batch_id) {
      const std::size_t n = std::min(bs, order.size() - start_at);
      const double batch_sse = batch_error(
          net, train_data, std::span<const std::size_t>(order).subspan(start_at, n), ws, xb, yb, &grad);
      if (!std::isfinite(batch_sse)) {
        throw SolverError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(batch_id) + " (learning rate " +
                          std::to_string(tc.learning_rate) + ", " + std::to_string(adam.steps()) +
                          " optimizer steps taken)");
      }
      sse += batch_sse;
      net.backward(grad, ws);
      adam.step(net.params(), std::span<const float>(net.grads()));
    }

    EpochRecord rec{epoch, sse / static_cast<double>(train_data.count * train_data.out_size),
                    mean_loss(net, val_data, tc.batch_size)};
    history.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (selection_loss(rec) < history.best_validation_loss) {
      history.best_validation_loss = selection_loss(rec);
      history.best_epoch = epoch;
      best = model;
    }
    if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(epoch, best);
    }
  }
  return TrainResult{std::move(best), std::move(history)};
}

std::vector<std::uint8_t> encode_model(const SurrogateModel& model) {
  nlohmann::json header{{"model", model.config()},
                        {"norm_stats", model.norm_stats()},
                        {"metadata", model.metadata()}};
  const std::string blob = header.dump();
  const auto& net = model.network();

  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.text(blob);
  w.u32(static_cast<std::uint32_t>(net.tensors().size()));
  const auto params = net.params();
  for (const auto& t : net.tensors()) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.text(t.name);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size; ++i) w.f32(params[t.offset + i]);
  }
  return w.take();
}

SurrogateModel decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "model file");
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw CorruptFileError("model file: bad magic");
  }
  const std::uint16_t version = r.u16();
  if (version != kModelFormatVersion) {
    throw VersionError("model file: format version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint32_t blob_size = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.text(blob_size));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("model file: unreadable header: ") + e.what());
  }
  ModelConfig config;
  NormStats stats;
  try {
    config = header.at("model").get<ModelConfig>();
    stats = header.at("norm_stats").get<NormStats>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(std::string("model file: incomplete header: ") + e.what());
  } catch (const ValidationError& e) {
    throw CorruptFileError(std::string("model file: invalid header: ") + e.what());
  }
  SurrogateModel model(config, stats);
  if (header.contains("metadata")) model.metadata() = header.at("metadata");

  auto& net = model.network();
  const std::uint32_t count = r.u32();
  if (count != net.tensors().size()) {
    throw CorruptFileError("model file: " + std::to_string(count) + " tensors, config implies " +
                           std::to_string(net.tensors().size()));
  }
  auto params = net.params();
  for (const auto& t : net.tensors()) {
    const std::string name = r.text(r.u16());
    if (name != t.name) {
      throw CorruptFileError("model file: expected tensor '" + t.name + "', found '" + name + "'");
    }
    const std::uint8_t rank = r.u8();
    if (rank != t.shape.size()) throw CorruptFileError("model file: rank mismatch for " + name);
    for (int d : t.shape) {
      if (r.u32() != static_cast<std::uint32_t>(d)) {
        throw CorruptFileError("model file: shape mismatch for " + name);
      }
    }
    for (std::size_t i = 0; i < t.size; ++i) params[t.offset + i] = r.f32();
  }
  if (r.remaining() != 0) throw CorruptFileError("model file: trailing bytes");
  return model;
}

void save_model(const SurrogateModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_model(model));
}

SurrogateModel load_model(const std::filesystem::path& path) {
  return decode_model(read_file_bytes(path));
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string model_fingerprint(const SurrogateModel& model) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(encode_model(model))));
  return buf;
}

}  // namespace gwhp

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwhp/dataset.hpp"
#include "gwhp/field.hpp"
#include "gwhp/nn/unet.hpp"

namespace gwhp {

using nn::ModelConfig;

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// U-Net weights plus everything needed to run it on raw velocities.
class SurrogateModel {
 public:
  SurrogateModel(ModelConfig config, NormStats stats);

  [[nodiscard]] const ModelConfig& config() const { return net_.config(); }
  [[nodiscard]] const NormStats& norm_stats() const { return stats_; }
  void set_norm_stats(const NormStats& stats);
  [[nodiscard]] std::size_t parameter_count() const { return net_.parameter_count(); }

  nn::UNet<float>& network() { return net_; }
  [[nodiscard]] const nn::UNet<float>& network() const { return net_; }

  /// Free-form provenance (training config, data fingerprint, ...).
  nlohmann::json& metadata() { return metadata_; }
  [[nodiscard]] const nlohmann::json& metadata() const { return metadata_; }

 private:
  nn::UNet<float> net_;
  NormStats stats_;
  nlohmann::json metadata_ = nlohmann::json::object();
};

SurrogateModel build_model(const ModelConfig& config, std::uint64_t seed);

/// Normalized (in_channels x n x n) input -> normalized output. Safe to call
/// concurrently on a shared model.
std::vector<float> forward(const SurrogateModel& model, std::span<const float> input);
std::vector<float> forward(const SurrogateModel& model, std::span<const double> input);

/// Temperature in C from a raw Darcy velocity field.
ScalarField infer(const SurrogateModel& model, const VectorField& velocity);

struct TrainConfig {
  double learning_rate = 4e-4;
  int batch_size = 64;
  int epochs = 2000;
  std::uint64_t seed = 0;
  /// Calls the checkpoint hook every this many epochs; 0 disables it.
  int checkpoint_every = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  /// Selection used the training loss because the validation split was empty.
  bool selected_on_train = false;
};

void to_json(nlohmann::json& j, const TrainHistory& h);

struct TrainResult {
  SurrogateModel model;  // best-validation weights
  TrainHistory history;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Receives the best model so far.
  std::function<void(int epoch, const SurrogateModel&)> on_checkpoint;
};

/// Adam on the MSE of normalized pairs. Batch order depends only on
/// (seed, epoch). Throws SolverError on a non-finite loss.
TrainResult train(const SurrogateModel& initial, const DatasetSplit& split, const TrainConfig& tc,
                  const TrainHooks& hooks = {});

/// Mean squared error of the model over normalized pairs.
double evaluate_loss(const SurrogateModel& model, std::span<const TrainingPair> pairs,
                     int batch_size = 64);

std::vector<std::uint8_t> encode_model(const SurrogateModel& model);
SurrogateModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const SurrogateModel& model, const std::filesystem::path& path);
SurrogateModel load_model(const std::filesystem::path& path);

/// FNV-1a over the encoded model, as 16 hex digits.
std::string model_fingerprint(const SurrogateModel& model);
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);

}  // namespace gwhp

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gwhp::nn {

/// Architecture of the encoder-decoder. Level l of the encoder is a stride-2
/// convolution to channel_schedule[l]; the decoder mirrors it with stride-2
/// transposed convolutions, concatenating the matching encoder output.
struct ModelConfig {
  int input_size = 64;
  int in_channels = 2;
  int out_channels = 1;
  std::vector<int> channel_schedule{24, 48, 80, 96};
  int kernel_size = 4;
  bool skip_connections = true;
  std::string activation = "relu";

  [[nodiscard]] int levels() const { return static_cast<int>(channel_schedule.size()); }
  [[nodiscard]] int base_channels() const { return channel_schedule.empty() ? 0 : channel_schedule.front(); }
  [[nodiscard]] int bottleneck_spatial() const { return input_size >> levels(); }
  /// Throws ValidationError; among other things the bottleneck must stay above one pixel.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Per-call scratch memory. Forward fills it; backward consumes it. One per
/// thread when a model is shared.
template <typename Real>
struct Workspace {
  int batch = 0;
  std::vector<std::vector<Real>> enc;  // post-ReLU encoder outputs
  std::vector<std::vector<Real>> dec;  // decoder inputs (concat of upsampled and skip)
  std::vector<Real> input;             // channel-major copy of the input
  std::vector<Real> output;            // channel-major raw output
  std::vector<Real> cols;
  std::vector<Real> grad_a;
  std::vector<Real> grad_b;
  std::vector<std::vector<Real>> grad_enc;
};

template <typename Real>
class UNet {
 public:
  explicit UNet(ModelConfig config);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
  [[nodiscard]] const std::vector<TensorInfo>& tensors() const { return tensors_; }
  [[nodiscard]] const TensorInfo& tensor(const std::string& name) const;

  std::span<Real> params() { return params_; }
  [[nodiscard]] std::span<const Real> params() const { return params_; }
  std::span<Real> grads() { return grads_; }
  [[nodiscard]] std::span<const Real> grads() const { return grads_; }

  /// Fan-in scaled uniform weights, zero biases. Same seed gives the same weights.
  void initialize(std::uint64_t seed);

  /// input: batch x in_channels x size x size (sample-major); output: batch x out_channels x size x size.
  void forward(std::span<const Real> input, int batch, std::span<Real> output,
               Workspace<Real>& ws) const;
  /// Overwrites grads() with d(loss)/d(params) given d(loss)/d(output) from the
  /// forward call that last used `ws`.
  void backward(std::span<const Real> grad_output, Workspace<Real>& ws);

  [[nodiscard]] std::size_t sample_input_size() const;
  [[nodiscard]] std::size_t sample_output_size() const;

 private:
  struct Layer {
    int in_channels;
    int out_channels;
    std::size_t weight;  // index into tensors_
    std::size_t bias;
  };

  [[nodiscard]] int decoder_in_channels(int level) const;
  [[nodiscard]] int decoder_out_channels(int level) const;
  void prepare(Workspace<Real>& ws, int batch) const;

  ModelConfig config_;
  std::vector<Real> params_;
  std::vector<Real> grads_;
  std::vector<TensorInfo> tensors_;
  std::vector<Layer> encoder_;
  std::vector<Layer> decoder_;  // decoder_[l] upsamples from level l to level l-1
};

/// Parameter count of a config without allocating the model.
std::size_t count_parameters(const ModelConfig& config);

struct AdamConfig {
  double learning_rate = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam(std::size_t size, AdamConfig config);

  template <typename Real>
  void step(std::span<Real> params, std::span<const Real> grads);

  [[nodiscard]] std::uint64_t steps() const { return t_; }
  [[nodiscard]] const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

}  // namespace gwhp::nn

#include "gwhp/nn/unet.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"
#include "gwhp/nn/kernels.hpp"
#include "gwhp/random.hpp"

namespace gwhp::nn {

namespace {

constexpr std::uint64_t kInitStream = 0x4e4e;

struct LayerPlan {
  bool transposed;
  int in_channels;
  int out_channels;
  bool linear_head;
};

// Layer order fixes the tensor order in the parameter store: encoder
// levels top-down, then decoder levels from the bottleneck back up.
std::vector<LayerPlan> plan_layers(const ModelConfig& c) {
  const int levels = c.levels();
  const auto& ch = c.channel_schedule;
  std::vector<LayerPlan> plan;
  for (int l = 0; l < levels; ++l) {
    plan.push_back({false, l == 0 ? c.in_channels : ch[l - 1], ch[l], false});
  }
  for (int l = levels - 1; l >= 0; --l) {
    const int in = (l == levels - 1 || !c.skip_connections) ? ch[l] : 2 * ch[l];
    const int out = l == 0 ? c.out_channels : ch[l - 1];
    plan.push_back({true, in, out, l == 0});
  }
  return plan;
}

std::size_t layer_size(const LayerPlan& p, int k) {
  return static_cast<std::size_t>(p.in_channels) * p.out_channels * k * k +
         static_cast<std::size_t>(p.out_channels);
}

template <typename Real>
void to_channel_major(const Real* src, Real* dst, int batch, int channels, std::size_t plane) {
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < channels; ++c)
      std::copy_n(src + (static_cast<std::size_t>(n) * channels + c) * plane, plane,
                  dst + (static_cast<std::size_t>(c) * batch + n) * plane);
}

template <typename Real>
void to_sample_major(const Real* src, Real* dst, int batch, int channels, std::size_t plane) {
  for (int c = 0; c < channels; ++c)
    for (int n = 0; n < batch; ++n)
      std::copy_n(src + (static_cast<std::size_t>(c) * batch + n) * plane, plane,
                  dst + (static_cast<std::size_t>(n) * channels + c) * plane);
}

ConvGeometry geometry(int channels, int batch, int size, int k) {
  return ConvGeometry{channels, batch, size, size, k, 2, k / 2 - 1};
}

std::size_t plane_of(int size) { return static_cast<std::size_t>(size) * size; }

// y = conv(x); x is [cin][n][size][size], y is [cout][n][size/2][size/2].
template <typename Real>
void conv_forward(const Real* x, const Real* w, const Real* b, int cin, int cout, int batch,
                  int size, int k, Real* y, std::vector<Real>& cols) {
  const auto g = geometry(cin, batch, size, k);
  cols.resize(g.col_rows() * g.col_cols());
  im2col(x, g, cols.data());
  gemm_nn(w, cols.data(), y, static_cast<std::size_t>(cout), g.col_rows(), g.col_cols());
  add_bias_rows(y, b, static_cast<std::size_t>(cout), g.col_cols());
}

template <typename Real>
void conv_backward(const Real* x, const Real* w, const Real* dy, int cin, int cout, int batch,
                   int size, int k, Real* dw, Real* db, Real* dx, std::vector<Real>& cols) {
  const auto g = geometry(cin, batch, size, k);
  cols.resize(g.col_rows() * g.col_cols());
  im2col(x, g, cols.data());
  gemm_nt(dy, cols.data(), dw, static_cast<std::size_t>(cout), g.col_cols(), g.col_rows());
  sum_rows(dy, db, static_cast<std::size_t>(cout), g.col_cols());
  if (dx == nullptr) return;
  gemm_tn(w, dy, cols.data(), g.col_rows(), static_cast<std::size_t>(cout), g.col_cols());
  col2im(cols.data(), g, dx);
}

// y = deconv(x); x is [cin][n][size][size], y is [cout][n][2 size][2 size].
template <typename Real>
void deconv_forward(const Real* x, const Real* w, const Real* b, int cin, int cout, int batch,
                    int size, int k, Real* y, std::vector<Real>& cols) {
  const auto g = geometry(cout, batch, 2 * size, k);
  cols.resize(g.col_rows() * g.col_cols());
  gemm_tn(w, x, cols.data(), g.col_rows(), static_cast<std::size_t>(cin), g.col_cols());
  col2im(cols.data(), g, y);
  add_bias_rows(y, b, static_cast<std::size_t>(cout),
                static_cast<std::size_t>(batch) * plane_of(2 * size));
}

template <typename Real>
void deconv_backward(const Real* x, const Real* w, const Real* dy, int cin, int cout, int batch,
                     int size, int k, Real* dw, Real* db, Real* dx, std::vector<Real>& cols) {
  const auto g = geometry(cout, batch, 2 * size, k);
  cols.resize(g.col_rows() * g.col_cols());
  im2col(dy, g, cols.data());
  gemm_nt(x, cols.data(), dw, static_cast<std::size_t>(cin), g.col_cols(), g.col_rows());
  sum_rows(dy, db, static_cast<std::size_t>(cout),
           static_cast<std::size_t>(batch) * plane_of(2 * size));
  gemm_nn(w, cols.data(), dx, static_cast<std::size_t>(cin), g.col_rows(), g.col_cols());
}

}  // namespace

void ModelConfig::validate() const {
  if (channel_schedule.empty()) throw ValidationError("model: channel_schedule is empty");
  for (int c : channel_schedule) {
    if (c < 1) throw ValidationError("model: channel counts must be positive");
  }
  if (in_channels < 1 || out_channels < 1) throw ValidationError("model: channels must be positive");
  if (kernel_size < 2 || kernel_size % 2 != 0) {
    throw ValidationError("model: kernel_size must be even and >= 2");
  }
  if (activation != "relu") throw ValidationError("model: only relu activation is supported");
  if (input_size < 1 || levels() >= 31 || input_size % (1 << levels()) != 0) {
    throw ValidationError("model: input_size must be divisible by 2^levels");
  }
  if (bottleneck_spatial() <= 1) {
    throw ValidationError("model: bottleneck would be " + std::to_string(bottleneck_spatial()) +
                          " pixel(s); use fewer levels or a larger input");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"input_size", c.input_size},
                     {"in_channels", c.in_channels},
                     {"out_channels", c.out_channels},
                     {"channel_schedule", c.channel_schedule},
                     {"kernel_size", c.kernel_size},
                     {"skip_connections", c.skip_connections},
                     {"activation", c.activation}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig out;
  for (const auto& [key, value] : j.items()) {
    if (key == "input_size") out.input_size = value.get<int>();
    else if (key == "in_channels") out.in_channels = value.get<int>();
    else if (key == "out_channels") out.out_channels = value.get<int>();
    else if (key == "channel_schedule") out.channel_schedule = value.get<std::vector<int>>();
    else if (key == "kernel_size") out.kernel_size = value.get<int>();
    else if (key == "skip_connections") out.skip_connections = value.get<bool>();
    else if (key == "activation") out.activation = value.get<std::string>();
    else throw ValidationError("model: unknown key '" + key + "'");
  }
  out.validate();
  c = out;
}

std::size_t count_parameters(const ModelConfig& config) {
  config.validate();
  std::size_t total = 0;
  for (const auto& p : plan_layers(config)) total += layer_size(p, config.kernel_size);
  return total;
}

template <typename Real>
UNet<Real>::UNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const int k = config_.kernel_size;
  const int levels = config_.levels();
  std::size_t offset = 0;
  auto add_tensor = [&](std::string name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    tensors_.push_back({std::move(name), std::move(shape), offset, size});
    offset += size;
    return tensors_.size() - 1;
  };
  const auto plan = plan_layers(config_);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& p = plan[i];
    const bool enc = !p.transposed;
    const int level = enc ? static_cast<int>(i) : 2 * levels - 1 - static_cast<int>(i);
    const std::string prefix = (enc ? "encoder." : "decoder.") + std::to_string(level);
    const auto w = enc ? add_tensor(prefix + ".weight", {p.out_channels, p.in_channels, k, k})
                       : add_tensor(prefix + ".weight", {p.in_channels, p.out_channels, k, k});
    const auto b = add_tensor(prefix + ".bias", {p.out_channels});
    Layer layer{p.in_channels, p.out_channels, w, b};
    if (enc) {
      encoder_.push_back(layer);
    } else {
      decoder_.push_back(layer);
    }
  }
  // decoder_ was filled bottleneck-first; index it by level instead
  std::reverse(decoder_.begin(), decoder_.end());
  params_.assign(offset, Real(0));
  grads_.assign(offset, Real(0));
}

template <typename Real>
const TensorInfo& UNet<Real>::tensor(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ValidationError("model: no tensor named '" + name + "'");
}

template <typename Real>
void UNet<Real>::initialize(std::uint64_t seed) {
  Rng rng(mix_seed(seed, kInitStream));
  const int k2 = config_.kernel_size * config_.kernel_size;
  auto fill = [&](const Layer& layer, double fan_in, double gain) {
    const auto& w = tensors_[layer.weight];
    const double bound = std::sqrt(gain / fan_in);
    for (std::size_t i = 0; i < w.size; ++i) {
      params_[w.offset + i] = static_cast<Real>(rng.uniform(-bound, bound));
    }
    const auto& b = tensors_[layer.bias];
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size, Real(0));
  };
  for (const auto& layer : encoder_) fill(layer, double(layer.in_channels) * k2, 6.0);
  for (int l = config_.levels() - 1; l >= 0; --l) {
    // a stride-2 transposed conv sees a quarter of its kernel per output pixel
    const auto& layer = decoder_[static_cast<std::size_t>(l)];
    fill(layer, double(layer.in_channels) * k2 / 4.0, l == 0 ? 3.0 : 6.0);
  }
}

template <typename Real>
std::size_t UNet<Real>::sample_input_size() const {
  return static_cast<std::size_t>(config_.in_channels) * plane_of(config_.input_size);
}

template <typename Real>
std::size_t UNet<Real>::sample_output_size() const {
  return static_cast<std::size_t>(config_.out_channels) * plane_of(config_.input_size);
}

template <typename Real>
int UNet<Real>::decoder_in_channels(int level) const {
  return decoder_[static_cast<std::size_t>(level)].in_channels;
}

template <typename Real>
int UNet<Real>::decoder_out_channels(int level) const {
  return decoder_[static_cast<std::size_t>(level)].out_channels;
}

template <typename Real>
void UNet<Real>::prepare(Workspace<Real>& ws, int batch) const {
  const int levels = config_.levels();
  ws.batch = batch;
  ws.enc.resize(static_cast<std::size_t>(levels));
  ws.grad_enc.resize(static_cast<std::size_t>(levels));
  ws.dec.resize(static_cast<std::size_t>(levels > 1 ? levels - 1 : 0));
  for (int l = 0; l < levels; ++l) {
    const auto n = static_cast<std::size_t>(config_.channel_schedule[static_cast<std::size_t>(l)]) *
                   batch * plane_of(config_.input_size >> (l + 1));
    ws.enc[static_cast<std::size_t>(l)].resize(n);
  }
  for (int l = 0; l + 1 < levels; ++l) {
    ws.dec[static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(decoder_in_channels(l)) *
                                               batch * plane_of(config_.input_size >> (l + 1)));
  }
  ws.input.resize(sample_input_size() * batch);
  ws.output.resize(sample_output_size() * batch);
}

template <typename Real>
void UNet<Real>::forward(std::span<const Real> input, int batch, std::span<Real> output,
                         Workspace<Real>& ws) const {
  if (batch < 1) throw ValidationError("model: batch must be >= 1");
  if (input.size() != sample_input_size() * batch) {
    throw ValidationError("model: input has " + std::to_string(input.size()) + " values, expected " +
                          std::to_string(sample_input_size() * batch));
  }
  if (output.size() != sample_output_size() * batch) {
    throw ValidationError("model: output buffer has the wrong size");
  }
  prepare(ws, batch);
  const int levels = config_.levels();
  const int k = config_.kernel_size;
  const Real* p = params_.data();
  auto weight = [&](const Layer& l) { return p + tensors_[l.weight].offset; };
  auto bias = [&](const Layer& l) { return p + tensors_[l.bias].offset; };

  to_channel_major(input.data(), ws.input.data(), batch, config_.in_channels,
                   plane_of(config_.input_size));

  const Real* x = ws.input.data();
  int size = config_.input_size;
  for (int l = 0; l < levels; ++l) {
    const auto& layer = encoder_[static_cast<std::size_t>(l)];
    auto& y = ws.enc[static_cast<std::size_t>(l)];
    conv_forward(x, weight(layer), bias(layer), layer.in_channels, layer.out_channels, batch, size,
                 k, y.data(), ws.cols);
    relu_inplace(y.data(), y.size());
    x = y.data();
    size /= 2;
  }

  for (int l = levels - 1; l >= 1; --l) {
    const auto& layer = decoder_[static_cast<std::size_t>(l)];
    auto& d = ws.dec[static_cast<std::size_t>(l - 1)];
    deconv_forward(x, weight(layer), bias(layer), layer.in_channels, layer.out_channels, batch,
                   size, k, d.data(), ws.cols);
    size *= 2;
    const std::size_t upsampled = static_cast<std::size_t>(layer.out_channels) * batch * plane_of(size);
    relu_inplace(d.data(), upsampled);
    if (config_.skip_connections) {
      const auto& skip = ws.enc[static_cast<std::size_t>(l - 1)];
      std::copy(skip.begin(), skip.end(), d.begin() + static_cast<std::ptrdiff_t>(upsampled));
    }
    x = d.data();
  }

  const auto& head = decoder_[0];
  deconv_forward(x, weight(head), bias(head), head.in_channels, head.out_channels, batch, size, k,
                 ws.output.data(), ws.cols);
  to_sample_major(ws.output.data(), output.data(), batch, config_.out_channels,
                  plane_of(config_.input_size));
}

template <typename Real>
void UNet<Real>::backward(std::span<const Real> grad_output, Workspace<Real>& ws) {
  const int batch = ws.batch;
  if (batch < 1 || grad_output.size() != sample_output_size() * batch) {
    throw ValidationError("model: backward needs the gradient of the last forward output");
  }
  const int levels = config_.levels();
  const int k = config_.kernel_size;
  const Real* p = params_.data();
  Real* g = grads_.data();
  auto weight = [&](const Layer& l) { return p + tensors_[l.weight].offset; };
  auto dweight = [&](const Layer& l) { return g + tensors_[l.weight].offset; };
  auto dbias = [&](const Layer& l) { return g + tensors_[l.bias].offset; };
  // input of decoder level l: the bottleneck or the concatenated buffer
  auto decoder_input = [&](int l) -> std::vector<Real>& {
    return l == levels - 1 ? ws.enc[static_cast<std::size_t>(l)] : ws.dec[static_cast<std::size_t>(l)];
  };
  for (int l = 0; l < levels; ++l) {
    ws.grad_enc[static_cast<std::size_t>(l)].assign(ws.enc[static_cast<std::size_t>(l)].size(), Real(0));
  }
  std::vector<std::vector<Real>> grad_dec(ws.dec.size());
  for (std::size_t i = 0; i < ws.dec.size(); ++i) grad_dec[i].resize(ws.dec[i].size());
  auto decoder_input_grad = [&](int l) -> std::vector<Real>& {
    return l == levels - 1 ? ws.grad_enc[static_cast<std::size_t>(l)]
                           : grad_dec[static_cast<std::size_t>(l)];
  };

  ws.grad_a.resize(grad_output.size());
  to_channel_major(grad_output.data(), ws.grad_a.data(), batch, config_.out_channels,
                   plane_of(config_.input_size));

  int size = config_.input_size >> 1;
  const auto& head = decoder_[0];
  deconv_backward(decoder_input(0).data(), weight(head), ws.grad_a.data(), head.in_channels,
                  head.out_channels, batch, size, k, dweight(head), dbias(head),
                  decoder_input_grad(0).data(), ws.cols);

  for (int l = 1; l < levels; ++l) {
    // grad_dec[l-1] = [d upsampled ; d skip] at resolution `size`
    auto& gd = grad_dec[static_cast<std::size_t>(l - 1)];
    const auto& d = ws.dec[static_cast<std::size_t>(l - 1)];
    const auto& layer = decoder_[static_cast<std::size_t>(l)];
    const std::size_t upsampled = static_cast<std::size_t>(layer.out_channels) * batch * plane_of(size);
    relu_backward(d.data(), gd.data(), upsampled);
    if (config_.skip_connections) {
      auto& ge = ws.grad_enc[static_cast<std::size_t>(l - 1)];
      std::copy(gd.begin() + static_cast<std::ptrdiff_t>(upsampled), gd.end(), ge.begin());
    }
    deconv_backward(decoder_input(l).data(), weight(layer), gd.data(), layer.in_channels,
                    layer.out_channels, batch, size / 2, k, dweight(layer), dbias(layer),
                    decoder_input_grad(l).data(), ws.cols);
    size /= 2;
  }

  for (int l = levels - 1; l >= 0; --l) {
    const auto& layer = encoder_[static_cast<std::size_t>(l)];
    auto& ge = ws.grad_enc[static_cast<std::size_t>(l)];
    relu_backward(ws.enc[static_cast<std::size_t>(l)].data(), ge.data(), ge.size());
    const int in_size = config_.input_size >> l;
    const Real* x = l == 0 ? ws.input.data() : ws.enc[static_cast<std::size_t>(l - 1)].data();
    Real* dx = nullptr;
    if (l > 0) {
      ws.grad_b.resize(ws.enc[static_cast<std::size_t>(l - 1)].size());
      dx = ws.grad_b.data();
    }
    conv_backward(x, weight(layer), ge.data(), layer.in_channels, layer.out_channels, batch, in_size,
                  k, dweight(layer), dbias(layer), dx, ws.cols);
    if (dx != nullptr) {
      auto& prev = ws.grad_enc[static_cast<std::size_t>(l - 1)];
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += ws.grad_b[i];
    }
  }
}

template class UNet<float>;
template class UNet<double>;

Adam::Adam(std::size_t size, AdamConfig config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {
  if (!(config_.learning_rate > 0.0)) throw ValidationError("adam: learning_rate must be > 0");
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) || !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw ValidationError("adam: betas must lie in [0, 1)");
  }
}

template <typename Real>
void Adam::step(std::span<Real> params, std::span<const Real> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ValidationError("adam: parameter count changed");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  const auto n = static_cast<std::ptrdiff_t>(params.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double gi = grads[static_cast<std::size_t>(i)];
    double& m = m_[static_cast<std::size_t>(i)];
    double& v = v_[static_cast<std::size_t>(i)];
    m = b1 * m + (1.0 - b1) * gi;
    v = b2 * v + (1.0 - b2) * gi * gi;
    const double update = lr * (m / c1) / (std::sqrt(v / c2) + eps);
    params[static_cast<std::size_t>(i)] =
        static_cast<Real>(static_cast<double>(params[static_cast<std::size_t>(i)]) - update);
  }
}

template void Adam::step<float>(std::span<float>, std::span<const float>);
template void Adam::step<double>(std::span<double>, std::span<const double>);

}  // namespace gwhp::nn

#include "gwhp/nn/kernels.hpp"

#include <algorithm>

#include <Eigen/Core>

namespace gwhp::nn {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using ConstMap = Eigen::Map<const RowMat<Real>>;
template <typename Real>
using Map = Eigen::Map<RowMat<Real>>;

auto idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

template <typename Real>
void im2col(const Real* input, const ConvGeometry& g, Real* cols) {
  const int ho = g.out_height();
  const int wo = g.out_width();
  const int k = g.kernel;
  const std::size_t ncols = g.col_cols();
  const std::size_t plane = static_cast<std::size_t>(g.height) * static_cast<std::size_t>(g.width);
  const int rows = g.channels * k * k;

#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / (k * k);
    const int ky = (r / k) % k;
    const int kx = r % k;
    Real* dst = cols + static_cast<std::size_t>(r) * ncols;
    for (int n = 0; n < g.batch; ++n) {
      const Real* src = input + (static_cast<std::size_t>(c) * g.batch + n) * plane;
      for (int oy = 0; oy < ho; ++oy) {
        const int iy = oy * g.stride - g.pad + ky;
        Real* row = dst + (static_cast<std::size_t>(n) * ho + oy) * wo;
        if (iy < 0 || iy >= g.height) {
          std::fill(row, row + wo, Real(0));
          continue;
        }
        const Real* line = src + static_cast<std::size_t>(iy) * g.width;
        for (int ox = 0; ox < wo; ++ox) {
          const int ix = ox * g.stride - g.pad + kx;
          row[ox] = (ix >= 0 && ix < g.width) ? line[ix] : Real(0);
        }
      }
    }
  }
}

template <typename Real>
void col2im(const Real* cols, const ConvGeometry& g, Real* output) {
  const int ho = g.out_height();
  const int wo = g.out_width();
  const int k = g.kernel;
  const std::size_t ncols = g.col_cols();
  const std::size_t plane = static_cast<std::size_t>(g.height) * static_cast<std::size_t>(g.width);

  // each channel owns its output planes, so channels are independent
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    Real* out_c = output + static_cast<std::size_t>(c) * g.batch * plane;
    std::fill(out_c, out_c + static_cast<std::size_t>(g.batch) * plane, Real(0));
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Real* src = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ncols;
        for (int n = 0; n < g.batch; ++n) {
          Real* dst = out_c + static_cast<std::size_t>(n) * plane;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.height) continue;
            const Real* row = src + (static_cast<std::size_t>(n) * ho + oy) * wo;
            Real* line = dst + static_cast<std::size_t>(iy) * g.width;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.width) line[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

template <typename Real>
void gemm_nn(const Real* a, const Real* b, Real* out, std::size_t rows, std::size_t inner,
             std::size_t cols) {
  Map<Real>(out, idx(rows), idx(cols)).noalias() =
      ConstMap<Real>(a, idx(rows), idx(inner)) * ConstMap<Real>(b, idx(inner), idx(cols));
}

template <typename Real>
void gemm_tn(const Real* a, const Real* b, Real* out, std::size_t rows, std::size_t inner,
             std::size_t cols) {
  Map<Real>(out, idx(rows), idx(cols)).noalias() =
      ConstMap<Real>(a, idx(inner), idx(rows)).transpose() *
      ConstMap<Real>(b, idx(inner), idx(cols));
}

template <typename Real>
void gemm_nt(const Real* a, const Real* b, Real* out, std::size_t rows, std::size_t inner,
             std::size_t cols) {
  Map<Real>(out, idx(rows), idx(cols)).noalias() =
      ConstMap<Real>(a, idx(rows), idx(inner)) *
      ConstMap<Real>(b, idx(cols), idx(inner)).transpose();
}

template <typename Real>
void add_bias_rows(Real* data, const Real* bias, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    Real* row = data + r * cols;
    const Real b = bias[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += b;
  }
}

template <typename Real>
void sum_rows(const Real* grad, Real* bias_grad, std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = grad + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c];
    bias_grad[r] = static_cast<Real>(s);
  }
}

template <typename Real>
void relu_inplace(Real* data, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < n; ++k) data[k] = data[k] > Real(0) ? data[k] : Real(0);
}

template <typename Real>
void relu_backward(const Real* activation, Real* grad, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < n; ++k) {
    if (!(activation[k] > Real(0))) grad[k] = Real(0);
  }
}

#define GWHP_INSTANTIATE_KERNELS(Real)                                                        \
  template void im2col<Real>(const Real*, const ConvGeometry&, Real*);                      \
  template void col2im<Real>(const Real*, const ConvGeometry&, Real*);                      \
  template void gemm_nn<Real>(const Real*, const Real*, Real*, std::size_t, std::size_t,     \
                              std::size_t);                                                 \
  template void gemm_tn<Real>(const Real*, const Real*, Real*, std::size_t, std::size_t,     \
                              std::size_t);                                                 \
  template void gemm_nt<Real>(const Real*, const Real*, Real*, std::size_t, std::size_t,     \
                              std::size_t);                                                 \
  template void add_bias_rows<Real>(Real*, const Real*, std::size_t, std::size_t);           \
  template void sum_rows<Real>(const Real*, Real*, std::size_t, std::size_t);                \
  template void relu_inplace<Real>(Real*, std::size_t);                                      \
  template void relu_backward<Real>(const Real*, Real*, std::size_t);

GWHP_INSTANTIATE_KERNELS(float)
GWHP_INSTANTIATE_KERNELS(double)

#undef GWHP_INSTANTIATE_KERNELS

}  // namespace gwhp::nn

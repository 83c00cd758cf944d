#pragma once

#include <cstddef>

namespace gwhp::nn {

/// Geometry of a square-kernel strided convolution over a channel-major
/// batch tensor laid out as [channels][batch][height][width].
struct ConvGeometry {
  int channels = 0;  // channels of the large-resolution side
  int batch = 0;
  int height = 0;    // large-resolution side
  int width = 0;
  int kernel = 4;
  int stride = 2;
  int pad = 1;

  [[nodiscard]] int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  [[nodiscard]] int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  [[nodiscard]] std::size_t col_rows() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(kernel * kernel);
  }
  [[nodiscard]] std::size_t col_cols() const {
    return static_cast<std::size_t>(batch) * static_cast<std::size_t>(out_height()) *
           static_cast<std::size_t>(out_width());
  }
};

/// Unfolds receptive fields into columns: rows (c, ky, kx), columns (n, oy, ox).
template <typename Real>
void im2col(const Real* input, const ConvGeometry& g, Real* cols);

/// Adjoint of im2col: scatters columns back, overwriting `output`.
template <typename Real>
void col2im(const Real* cols, const ConvGeometry& g, Real* output);

/// out[rows x cols] = a[rows x inner] * b[inner x cols], all row-major.
template <typename Real>
void gemm_nn(const Real* a, const Real* b, Real* out, std::size_t rows, std::size_t inner,
             std::size_t cols);
/// out[rows x cols] = a[inner x rows]^T * b[inner x cols].
template <typename Real>
void gemm_tn(const Real* a, const Real* b, Real* out, std::size_t rows, std::size_t inner,
             std::size_t cols);
/// out[rows x cols] = a[rows x inner] * b[cols x inner]^T.
template <typename Real>
void gemm_nt(const Real* a, const Real* b, Real* out, std::size_t rows, std::size_t inner,
             std::size_t cols);

/// data[r][*] += bias[r] for a rows x cols matrix.
template <typename Real>
void add_bias_rows(Real* data, const Real* bias, std::size_t rows, std::size_t cols);
/// bias_grad[r] = sum_c grad[r][c].
template <typename Real>
void sum_rows(const Real* grad, Real* bias_grad, std::size_t rows, std::size_t cols);

template <typename Real>
void relu_inplace(Real* data, std::size_t n);
/// grad[k] = 0 where activation[k] <= 0.
template <typename Real>
void relu_backward(const Real* activation, Real* grad, std::size_t n);

}  // namespace gwhp::nn

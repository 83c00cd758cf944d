#pragma once

#include <vector>

// Serial direct-loop convolutions. Slow on purpose: they follow the
// textbook definitions and are the yardstick for the im2col/GEMM path.
// Tensors are channel-major batches [channels][batch][height][width].

namespace gwhp::nn::reference {

struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int batch = 0;
  int in_height = 0;
  int in_width = 0;
  int kernel = 4;
  int stride = 2;
  int pad = 1;
};

/// y[co][n][oy][ox] = b[co] + sum w[co][ci][ky][kx] x[ci][n][oy*s-p+ky][ox*s-p+kx]
template <typename Real>
std::vector<Real> conv2d(const std::vector<Real>& x, const std::vector<Real>& w,
                         const std::vector<Real>& b, const ConvShape& s);

template <typename Real>
void conv2d_backward(const std::vector<Real>& x, const std::vector<Real>& w,
                     const std::vector<Real>& dy, const ConvShape& s, std::vector<Real>& dx,
                     std::vector<Real>& dw, std::vector<Real>& db);

/// Transposed convolution, weight layout [in][out][ky][kx]:
/// y[co][n][iy*s-p+ky][ix*s-p+kx] += w[ci][co][ky][kx] x[ci][n][iy][ix]
template <typename Real>
std::vector<Real> conv_transpose2d(const std::vector<Real>& x, const std::vector<Real>& w,
                                   const std::vector<Real>& b, const ConvShape& s);

template <typename Real>
void conv_transpose2d_backward(const std::vector<Real>& x, const std::vector<Real>& w,
                               const std::vector<Real>& dy, const ConvShape& s,
                               std::vector<Real>& dx, std::vector<Real>& dw,
                               std::vector<Real>& db);

}  // namespace gwhp::nn::reference

#include "gwhp/nn/reference.hpp"

#include <cstddef>

namespace gwhp::nn::reference {

namespace {

std::size_t at(int c, int n, int y, int x, int batch, int h, int w) {
  return ((static_cast<std::size_t>(c) * batch + n) * h + y) * w + x;
}

int conv_out(int in, const ConvShape& s) { return (in + 2 * s.pad - s.kernel) / s.stride + 1; }
int deconv_out(int in, const ConvShape& s) { return (in - 1) * s.stride - 2 * s.pad + s.kernel; }

std::size_t widx(int a, int b, int ky, int kx, int nb, int k) {
  return ((static_cast<std::size_t>(a) * nb + b) * k + ky) * k + kx;
}

}  // namespace

template <typename Real>
std::vector<Real> conv2d(const std::vector<Real>& x, const std::vector<Real>& w,
                         const std::vector<Real>& b, const ConvShape& s) {
  const int ho = conv_out(s.in_height, s);
  const int wo = conv_out(s.in_width, s);
  std::vector<Real> y(static_cast<std::size_t>(s.out_channels) * s.batch * ho * wo);
  for (int co = 0; co < s.out_channels; ++co)
    for (int n = 0; n < s.batch; ++n)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double acc = b[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < s.kernel; ++ky)
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int iy = oy * s.stride - s.pad + ky;
                const int ix = ox * s.stride - s.pad + kx;
                if (iy < 0 || iy >= s.in_height || ix < 0 || ix >= s.in_width) continue;
                acc += static_cast<double>(w[widx(co, ci, ky, kx, s.in_channels, s.kernel)]) *
                       x[at(ci, n, iy, ix, s.batch, s.in_height, s.in_width)];
              }
          y[at(co, n, oy, ox, s.batch, ho, wo)] = static_cast<Real>(acc);
        }
  return y;
}

template <typename Real>
void conv2d_backward(const std::vector<Real>& x, const std::vector<Real>& w,
                     const std::vector<Real>& dy, const ConvShape& s, std::vector<Real>& dx,
                     std::vector<Real>& dw, std::vector<Real>& db) {
  const int ho = conv_out(s.in_height, s);
  const int wo = conv_out(s.in_width, s);
  std::vector<double> gx(x.size(), 0.0);
  std::vector<double> gw(w.size(), 0.0);
  std::vector<double> gb(static_cast<std::size_t>(s.out_channels), 0.0);
  for (int co = 0; co < s.out_channels; ++co)
    for (int n = 0; n < s.batch; ++n)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          const double g = dy[at(co, n, oy, ox, s.batch, ho, wo)];
          gb[static_cast<std::size_t>(co)] += g;
          for (int ci = 0; ci < s.in_channels; ++ci)
            for (int ky = 0; ky < s.kernel; ++ky)
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int iy = oy * s.stride - s.pad + ky;
                const int ix = ox * s.stride - s.pad + kx;
                if (iy < 0 || iy >= s.in_height || ix < 0 || ix >= s.in_width) continue;
                const auto xi = at(ci, n, iy, ix, s.batch, s.in_height, s.in_width);
                const auto wi = widx(co, ci, ky, kx, s.in_channels, s.kernel);
                gw[wi] += g * x[xi];
                gx[xi] += g * w[wi];
              }
        }
  dx.assign(gx.begin(), gx.end());
  dw.assign(gw.begin(), gw.end());
  db.assign(gb.begin(), gb.end());
}

template <typename Real>
std::vector<Real> conv_transpose2d(const std::vector<Real>& x, const std::vector<Real>& w,
                                   const std::vector<Real>& b, const ConvShape& s) {
  const int ho = deconv_out(s.in_height, s);
  const int wo = deconv_out(s.in_width, s);
  std::vector<double> acc(static_cast<std::size_t>(s.out_channels) * s.batch * ho * wo, 0.0);
  for (int co = 0; co < s.out_channels; ++co)
    for (int n = 0; n < s.batch; ++n)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) acc[at(co, n, oy, ox, s.batch, ho, wo)] = b[static_cast<std::size_t>(co)];
  for (int ci = 0; ci < s.in_channels; ++ci)
    for (int n = 0; n < s.batch; ++n)
      for (int iy = 0; iy < s.in_height; ++iy)
        for (int ix = 0; ix < s.in_width; ++ix) {
          const double v = x[at(ci, n, iy, ix, s.batch, s.in_height, s.in_width)];
          for (int co = 0; co < s.out_channels; ++co)
            for (int ky = 0; ky < s.kernel; ++ky)
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int oy = iy * s.stride - s.pad + ky;
                const int ox = ix * s.stride - s.pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                acc[at(co, n, oy, ox, s.batch, ho, wo)] +=
                    v * w[widx(ci, co, ky, kx, s.out_channels, s.kernel)];
              }
        }
  return {acc.begin(), acc.end()};
}

template <typename Real>
void conv_transpose2d_backward(const std::vector<Real>& x, const std::vector<Real>& w,
                               const std::vector<Real>& dy, const ConvShape& s,
                               std::vector<Real>& dx, std::vector<Real>& dw,
                               std::vector<Real>& db) {
  const int ho = deconv_out(s.in_height, s);
  const int wo = deconv_out(s.in_width, s);
  std::vector<double> gx(x.size(), 0.0);
  std::vector<double> gw(w.size(), 0.0);
  std::vector<double> gb(static_cast<std::size_t>(s.out_channels), 0.0);
  for (int co = 0; co < s.out_channels; ++co)
    for (int n = 0; n < s.batch; ++n)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) gb[static_cast<std::size_t>(co)] += dy[at(co, n, oy, ox, s.batch, ho, wo)];
  for (int ci = 0; ci < s.in_channels; ++ci)
    for (int n = 0; n < s.batch; ++n)
      for (int iy = 0; iy < s.in_height; ++iy)
        for (int ix = 0; ix < s.in_width; ++ix) {
          const auto xi = at(ci, n, iy, ix, s.batch, s.in_height, s.in_width);
          for (int co = 0; co < s.out_channels; ++co)
            for (int ky = 0; ky < s.kernel; ++ky)
              for (int kx = 0; kx < s.kernel; ++kx) {
                const int oy = iy * s.stride - s.pad + ky;
                const int ox = ix * s.stride - s.pad + kx;
                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                const double g = dy[at(co, n, oy, ox, s.batch, ho, wo)];
                const auto wi = widx(ci, co, ky, kx, s.out_channels, s.kernel);
                gx[xi] += g * w[wi];
                gw[wi] += g * x[xi];
              }
        }
  dx.assign(gx.begin(), gx.end());
  dw.assign(gw.begin(), gw.end());
  db.assign(gb.begin(), gb.end());
}

#define GWHP_INSTANTIATE_REFERENCE(Real)                                                     \
  template std::vector<Real> conv2d<Real>(const std::vector<Real>&, const std::vector<Real>&, \
                                          const std::vector<Real>&, const ConvShape&);        \
  template void conv2d_backward<Real>(const std::vector<Real>&, const std::vector<Real>&,     \
                                      const std::vector<Real>&, const ConvShape&,             \
                                      std::vector<Real>&, std::vector<Real>&,                 \
                                      std::vector<Real>&);                                    \
  template std::vector<Real> conv_transpose2d<Real>(                                          \
      const std::vector<Real>&, const std::vector<Real>&, const std::vector<Real>&,           \
      const ConvShape&);                                                                      \
  template void conv_transpose2d_backward<Real>(                                              \
      const std::vector<Real>&, const std::vector<Real>&, const std::vector<Real>&,           \
      const ConvShape&, std::vector<Real>&, std::vector<Real>&, std::vector<Real>&);

GWHP_INSTANTIATE_REFERENCE(float)
GWHP_INSTANTIATE_REFERENCE(double)

#undef GWHP_INSTANTIATE_REFERENCE

}  // namespace gwhp::nn::reference

#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance suite. Nothing here calls the code path it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "gwhp/darcy.hpp"
#include "gwhp/field.hpp"
#include "gwhp/geogen.hpp"
#include "gwhp/lahm.hpp"

namespace oracles {

using namespace gwhp;

/// L-infinity error of the cell-centered pressure solve against the
/// manufactured solution sin(pi x) sin(pi y) on the unit square, K = 1.
inline double manufactured_error(int n) {
  const Grid g{n, n, 1.0 / n, 1.0 / n, 1.0};
  const double k = std::numbers::pi;
  std::vector<double> source(g.cell_count());
  std::vector<double> exact(g.cell_count());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5) / n;
      const double y = (j + 0.5) / n;
      const double p = std::sin(k * x) * std::sin(k * y);
      exact[g.flat(i, j)] = p;
      // -lap p = 2 pi^2 p, integrated over the cell by the midpoint rule
      source[g.flat(i, j)] = 2.0 * k * k * p * g.cell_volume();
    }
  }
  const auto p = solve_pressure_system(ScalarField(g, 1.0), [](double, double) { return 0.0; }, source);
  double err = 0.0;
  for (std::size_t c = 0; c < exact.size(); ++c) err = std::max(err, std::fabs(p[c] - exact[c]));
  return err;
}

/// Scenario with spatially uniform permeability `k` and gradient (gx, gy).
inline ScenarioSpec uniform_scenario(const Grid& g, double gx, double gy, double k = 1e-8) {
  ScenarioSpec s;
  s.grid = g;
  s.geology.control_grid_size = 4;
  s.geology.control_values = std::vector<double>(16, k);
  s.geology.gradient_x = gx;
  s.geology.gradient_y = gy;
  s.well.cell = center_cell_index(g);
  return s;
}

/// max |qy| / max |qx| for the well-free flow driven by an x gradient.
inline double transverse_flow_ratio(const ScalarField& permeability, double gx) {
  const PressureBoundary boundary{gx, 0.0};
  const auto p = solve_pressure(permeability, boundary, std::nullopt, SimParams{});
  const auto q = darcy_velocity(permeability, p, boundary);
  double qx = 0.0;
  double qy = 0.0;
  for (std::size_t c = 0; c < permeability.size(); ++c) {
    qx = std::max(qx, std::fabs(q.x()[c]));
    qy = std::max(qy, std::fabs(q.y()[c]));
  }
  return qy / qx;
}

/// Surplus-weighted centroid of T - ambient, in cells relative to `origin`.
inline Point2 plume_centroid(const ScalarField& t, CellIndex origin, double ambient) {
  const Grid& g = t.grid();
  double m = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double w = t(i, j) - ambient;
      m += w;
      cx += w * (i - origin.i);
      cy += w * (j - origin.j);
    }
  }
  return {cx / m, cy / m};
}

/// Distance (m) from the well center along the lattice direction (di, dj)
/// at which T - ambient first drops below `level`, linearly interpolated.
inline double front_radius(const ScalarField& t, CellIndex well, int di, int dj, double level,
                           double ambient = 10.0) {
  const Grid& g = t.grid();
  const double step = std::hypot(di * g.dx, dj * g.dy);
  for (int d = 0;; ++d) {
    const int i1 = well.i + (d + 1) * di;
    const int j1 = well.j + (d + 1) * dj;
    if (i1 < 0 || j1 < 0 || i1 >= g.nx || j1 >= g.ny) return d * step;
    const double a = t(well.i + d * di, well.j + d * dj) - ambient;
    const double b = t(i1, j1) - ambient;
    if (b < level) return (d + (a - level) / (a - b)) * step;
  }
}

struct RadialSymmetry {
  double mirror_error = 0.0;  // max |T - T mirrored| over the square's symmetries
  std::array<double, 3> radii{};  // half-surplus front along axis, diagonal, (2,1)
  double asymmetry = 0.0;  // (max - min) / max of the radii
};

/// Zero-gradient, uniform-medium injection on a 65 x 65 grid with the default
/// 2 m spacing, run until the plume front sits about 20 cells out.
inline RadialSymmetry radial_symmetry() {
  const Grid g{65, 65};
  auto spec = uniform_scenario(g, 0.0, 0.0);
  spec.well.cell = {32, 32};
  TransportConfig tc;
  tc.total_time_days = 240.0;
  const auto t = run_scenario(spec, tc).temperature;
  RadialSymmetry r;
  for (int j = 0; j < 65; ++j) {
    for (int i = 0; i < 65; ++i) {
      r.mirror_error = std::max({r.mirror_error, std::fabs(t(i, j) - t(64 - i, j)),
                                 std::fabs(t(i, j) - t(i, 64 - j)), std::fabs(t(i, j) - t(j, i))});
    }
  }
  const double half = 0.5 * (spec.well.injection_temperature - 10.0);
  r.radii = {front_radius(t, spec.well.cell, 1, 0, half), front_radius(t, spec.well.cell, 1, 1, half),
             front_radius(t, spec.well.cell, 2, 1, half)};
  const auto [lo, hi] = std::minmax_element(r.radii.begin(), r.radii.end());
  r.asymmetry = (*hi - *lo) / *hi;
  return r;
}

/// Composite Simpson rule on [a, b] with an even number of intervals.
template <typename F>
double simpson(F&& f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int k = 1; k < intervals; ++k) sum += f(a + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

/// LAHM surplus with both factors evaluated by quadrature instead of closed
/// forms. The transverse factor is the Green's function of the paraxial
/// transport equation v dT/dx = v aT d2T/dy2 for a line source, written as
/// the cosine integral (1/pi) int_0^inf exp(-aT x k^2) cos(k y) dk; the
/// longitudinal front is erfc(z) = (2/sqrt(pi)) int_z^inf exp(-s^2) ds.
inline double lahm_quadrature(const LahmParams& p, double x, double y) {
  if (x <= 0.0) return 0.0;
  const double variance_k = p.alpha_t * x;  // exp(-variance_k k^2)
  const double k_max = std::sqrt(40.0 / variance_k);
  const double green = simpson([&](double k) { return std::exp(-variance_k * k * k) * std::cos(k * y); },
                               0.0, k_max, 4000) / std::numbers::pi;
  const double u = p.velocity / p.retardation;
  const double r = std::sqrt(x * x + y * y * p.alpha_l / p.alpha_t);
  const double z = (r - u * p.time) / (2.0 * std::sqrt(p.alpha_l * u * p.time));
  const double upper = std::max(z, 0.0) + 9.0;
  const double front = 2.0 / std::sqrt(std::numbers::pi) *
                       simpson([](double s) { return std::exp(-s * s); }, z, upper, 4000);
  // The line source carries dT_inj Q / (n b v) per unit width downstream;
  // the closed form's 1 / (4 sqrt(pi aT x)) prefactor equals green / 2 at y = 0.
  const double strength = p.delta_t_inj * p.injection_rate / (p.porosity * p.thickness * p.velocity);
  return 0.5 * strength * green * front;
}

/// Continuous point injection in uniform flow with longitudinal and
/// transverse dispersion, integrated over the injection history:
///
///   (dT_inj Q / (4 pi n b R)) int_0^t exp(-(x - u s)^2 / (4 Dl s) - y^2 / (4 Dt s)) / (s sqrt(Dl Dt)) ds
///
/// with u = v / (n R) the retarded thermal front speed and D = alpha u. The
/// closed form is its far-field approximation, so only rough agreement is expected.
inline double point_source_history(const LahmParams& p, double x, double y) {
  const double u = p.velocity / p.retardation;
  const double dl = p.alpha_l * u;
  const double dt = p.alpha_t * u;
  const double pre = p.delta_t_inj * p.injection_rate /
                     (4.0 * std::numbers::pi * p.porosity * p.thickness * p.retardation * std::sqrt(dl * dt));
  // substitute s = t exp(-w): ds / s = -dw
  const auto f = [&](double w) {
    const double s = p.time * std::exp(-w);
    return std::exp(-(x - u * s) * (x - u * s) / (4.0 * dl * s) - y * y / (4.0 * dt * s));
  };
  return pre * simpson(f, 0.0, 60.0, 40000);
}

/// Dense TPS oracle: assembles the bordered system with r^2 ln r evaluated
/// from the distance (not r^2) and solves it by Gaussian elimination with
/// partial pivoting in long double.
struct DenseTps {
  std::vector<Point2> centers;
  std::vector<long double> coef;  // n weights then a0, a1, a2

  explicit DenseTps(const ControlPointSet& s) : centers(s.positions) {
    const std::size_t n = centers.size();
    const std::size_t m = n + 3;
    std::vector<std::vector<long double>> a(m, std::vector<long double>(m + 1, 0.0L));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) a[r][c] = phi(centers[r], centers[c].x, centers[c].y);
      a[r][n] = a[n][r] = 1.0L;
      a[r][n + 1] = a[n + 1][r] = centers[r].x;
      a[r][n + 2] = a[n + 2][r] = centers[r].y;
      a[r][m] = s.values[r];
    }
    for (std::size_t col = 0; col < m; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < m; ++r) {
        if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
      }
      std::swap(a[col], a[piv]);
      for (std::size_t r = col + 1; r < m; ++r) {
        const long double f = a[r][col] / a[col][col];
        for (std::size_t c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
      }
    }
    coef.assign(m, 0.0L);
    for (std::size_t r = m; r-- > 0;) {
      long double acc = a[r][m];
      for (std::size_t c = r + 1; c < m; ++c) acc -= a[r][c] * coef[c];
      coef[r] = acc / a[r][r];
    }
  }

  static long double phi(const Point2& p, double x, double y) {
    const long double r = std::hypot(static_cast<long double>(p.x - x), static_cast<long double>(p.y - y));
    return r > 0 ? r * r * std::log(r) : 0.0L;
  }

  [[nodiscard]] double operator()(double x, double y) const {
    const std::size_t n = centers.size();
    long double s = coef[n] + coef[n + 1] * x + coef[n + 2] * y;
    for (std::size_t k = 0; k < n; ++k) s += coef[k] * phi(centers[k], x, y);
    return static_cast<double>(s);
  }
};

/// Dot product of the plume's surplus-weighted offset from the well with the
/// mean Darcy velocity over the 7 x 7 window around it. Positive means the
/// plume sits downstream.
inline double downstream_alignment(const Sample& s) {
  const auto w = s.spec.well.cell;
  const auto c = plume_centroid(s.temperature, w, 10.0);
  double qx = 0.0;
  double qy = 0.0;
  for (int dj = -3; dj <= 3; ++dj) {
    for (int di = -3; di <= 3; ++di) {
      const auto k = s.spec.grid.flat(w.i + di, w.j + dj);
      qx += s.velocity.x()[k];
      qy += s.velocity.y()[k];
    }
  }
  return c.x * qx + c.y * qy;
}

}  // namespace oracles

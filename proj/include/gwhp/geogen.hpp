#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gwhp/field.hpp"

namespace gwhp {

/// Parameters of one random geology: permeability control lattice plus the
/// regional pressure gradient applied through the boundary.
struct GeologySpec {
  std::uint64_t seed = 0;
  int control_grid_size = 4;
  double perm_min = 2.1e-9;
  double perm_max = 4.1e-8;
  double gradient_x = 0.0;  // Pa/m
  double gradient_y = 0.0;  // Pa/m
  /// Explicit control values (row-major, size^2 entries). When absent the
  /// values are drawn from `seed`.
  std::optional<std::vector<double>> control_values;

  void validate() const;
};

void to_json(nlohmann::json& j, const GeologySpec& spec);
void from_json(const nlohmann::json& j, GeologySpec& spec);

struct ControlPointSet {
  std::vector<Point2> positions;
  std::vector<double> values;
};

/// Range used when drawing random pressure gradients. Each component is
/// uniform in [-max_abs, max_abs].
struct GradientRange {
  double max_abs = 200.0;  // Pa/m
};

/// Knobs for drawing complete random geologies during dataset generation.
struct GeologyConfig {
  double perm_min = 2.1e-9;
  double perm_max = 4.1e-8;
  std::vector<int> control_grid_sizes{4, 6, 8};
  GradientRange gradient;
};

/// size^2 points on an even lattice with a half-spacing margin; values are
/// i.i.d. uniform in [perm_min, perm_max] unless the spec carries explicit values.
ControlPointSet sample_control_points(const GeologySpec& spec, const Grid& grid = Grid{});

/// Uniform gradient components; deterministic in `seed`.
std::pair<double, double> sample_pressure_gradient(std::uint64_t seed, const GradientRange& range);

/// Draws control size and gradient for scenario `seed` and returns the full spec.
GeologySpec draw_geology(std::uint64_t seed, const GeologyConfig& config);

/// Thin-plate spline s(x) = sum_i w_i phi(|x - x_i|) + a0 + a1 x + a2 y,
/// phi(r) = r^2 ln r, with the orthogonality side conditions on w.
class ThinPlateSpline {
 public:
  /// Throws ValidationError on fewer than three points, coincident or
  /// collinear points (singular system).
  explicit ThinPlateSpline(const ControlPointSet& points);

  [[nodiscard]] double operator()(double x, double y) const;
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<double>& affine() const { return affine_; }

 private:
  std::vector<Point2> centers_;
  std::vector<double> weights_;
  std::vector<double> affine_;
};

/// TPS kernel r^2 ln r written in terms of r^2, with phi(0) = 0.
double tps_kernel_sq(double r2);

/// Samples the TPS interpolant at every cell center, clamping from below at `floor`.
ScalarField tps_interpolate(const ControlPointSet& points, const Grid& grid, double floor);

/// Full permeability field for a geology: control points, TPS, floor perm_min/10.
ScalarField permeability_field(const GeologySpec& spec, const Grid& grid);

}  // namespace gwhp

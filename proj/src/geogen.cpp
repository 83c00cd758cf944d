#include "gwhp/geogen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"
#include "gwhp/random.hpp"

namespace gwhp {

namespace {

constexpr std::uint64_t kControlStream = 1;
constexpr std::uint64_t kGradientStream = 2;
constexpr std::uint64_t kSizeStream = 3;

}  // namespace

void GeologySpec::validate() const {
  if (control_grid_size != 4 && control_grid_size != 6 && control_grid_size != 8) {
    throw ValidationError("geology: control_grid_size must be one of 4, 6, 8");
  }
  if (!(perm_min > 0.0) || !(perm_max > perm_min)) {
    throw ValidationError("geology: require 0 < perm_min < perm_max");
  }
  if (!std::isfinite(gradient_x) || !std::isfinite(gradient_y)) {
    throw ValidationError("geology: gradient must be finite");
  }
  if (control_values) {
    const auto n = static_cast<std::size_t>(control_grid_size * control_grid_size);
    if (control_values->size() != n) {
      throw ValidationError("geology: control_values needs " + std::to_string(n) + " entries");
    }
    for (double v : *control_values) {
      if (!(v >= perm_min && v <= perm_max)) {
        throw ValidationError("geology: control value outside [perm_min, perm_max]");
      }
    }
  }
}

void to_json(nlohmann::json& j, const GeologySpec& spec) {
  j = nlohmann::json{{"seed", spec.seed},
                     {"control_grid_size", spec.control_grid_size},
                     {"perm_min", spec.perm_min},
                     {"perm_max", spec.perm_max},
                     {"gradient_x", spec.gradient_x},
                     {"gradient_y", spec.gradient_y}};
  if (spec.control_values) j["control_values"] = *spec.control_values;
}

void from_json(const nlohmann::json& j, GeologySpec& spec) {
  for (const auto& [key, _] : j.items()) {
    if (key != "seed" && key != "control_grid_size" && key != "perm_min" && key != "perm_max" &&
        key != "gradient_x" && key != "gradient_y" && key != "control_values") {
      throw ValidationError("geology: unknown key '" + key + "'");
    }
  }
  GeologySpec out;
  out.seed = j.value("seed", std::uint64_t{0});
  out.control_grid_size = j.value("control_grid_size", 4);
  out.perm_min = j.value("perm_min", out.perm_min);
  out.perm_max = j.value("perm_max", out.perm_max);
  out.gradient_x = j.value("gradient_x", 0.0);
  out.gradient_y = j.value("gradient_y", 0.0);
  if (j.contains("control_values")) {
    out.control_values = j.at("control_values").get<std::vector<double>>();
  }
  out.validate();
  spec = std::move(out);
}

ControlPointSet sample_control_points(const GeologySpec& spec, const Grid& grid) {
  spec.validate();
  grid.validate();
  const int n = spec.control_grid_size;
  const double sx = grid.length_x() / n;
  const double sy = grid.length_y() / n;

  ControlPointSet set;
  set.positions.reserve(static_cast<std::size_t>(n * n));
  set.values.reserve(static_cast<std::size_t>(n * n));
  Rng rng(mix_seed(spec.seed, kControlStream));
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      set.positions.push_back({(a + 0.5) * sx, (b + 0.5) * sy});
      if (spec.control_values) {
        set.values.push_back((*spec.control_values)[static_cast<std::size_t>(b * n + a)]);
      } else {
        set.values.push_back(rng.uniform(spec.perm_min, spec.perm_max));
      }
    }
  }
  return set;
}

std::pair<double, double> sample_pressure_gradient(std::uint64_t seed, const GradientRange& range) {
  if (!(range.max_abs >= 0.0)) throw ValidationError("gradient range must be non-negative");
  Rng rng(mix_seed(seed, kGradientStream));
  const double gx = rng.uniform(-range.max_abs, range.max_abs);
  const double gy = rng.uniform(-range.max_abs, range.max_abs);
  return {gx, gy};
}

GeologySpec draw_geology(std::uint64_t seed, const GeologyConfig& config) {
  if (config.control_grid_sizes.empty()) {
    throw ValidationError("geology config: control_grid_sizes is empty");
  }
  Rng size_rng(mix_seed(seed, kSizeStream));
  GeologySpec spec;
  spec.seed = seed;
  spec.control_grid_size =
      config.control_grid_sizes[size_rng.below(config.control_grid_sizes.size())];
  spec.perm_min = config.perm_min;
  spec.perm_max = config.perm_max;
  std::tie(spec.gradient_x, spec.gradient_y) = sample_pressure_gradient(seed, config.gradient);
  spec.validate();
  return spec;
}

double tps_kernel_sq(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }

ThinPlateSpline::ThinPlateSpline(const ControlPointSet& points) : centers_(points.positions) {
  const auto n = points.positions.size();
  if (n < 3 || points.values.size() != n) {
    throw ValidationError("tps: need at least 3 control points with one value each");
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (points.positions[a] == points.positions[b]) {
        throw ValidationError("tps: coincident control points " + std::to_string(a) + " and " +
                              std::to_string(b));
      }
    }
  }

  const auto m = static_cast<Eigen::Index>(n + 3);
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (std::size_t a = 0; a < n; ++a) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto& pa = points.positions[a];
    for (std::size_t b = 0; b < n; ++b) {
      const auto& pb = points.positions[b];
      const double dx = pa.x - pb.x;
      const double dy = pa.y - pb.y;
      system(ia, static_cast<Eigen::Index>(b)) = tps_kernel_sq(dx * dx + dy * dy);
    }
    const auto n3 = static_cast<Eigen::Index>(n);
    system(ia, n3) = system(n3, ia) = 1.0;
    system(ia, n3 + 1) = system(n3 + 1, ia) = pa.x;
    system(ia, n3 + 2) = system(n3 + 2, ia) = pa.y;
    rhs(ia) = points.values[a];
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) {
    throw ValidationError("tps: singular system (collinear or degenerate control points)");
  }
  const Eigen::VectorXd solution = lu.solve(rhs);
  weights_.assign(solution.data(), solution.data() + n);
  affine_.assign(solution.data() + n, solution.data() + n + 3);
}

double ThinPlateSpline::operator()(double x, double y) const {
  double s = affine_[0] + affine_[1] * x + affine_[2] * y;
  for (std::size_t a = 0; a < centers_.size(); ++a) {
    const double dx = x - centers_[a].x;
    const double dy = y - centers_[a].y;
    s += weights_[a] * tps_kernel_sq(dx * dx + dy * dy);
  }
  return s;
}

ScalarField tps_interpolate(const ControlPointSet& points, const Grid& grid, double floor) {
  grid.validate();
  const ThinPlateSpline spline(points);
  std::vector<double> values(grid.cell_count());
#pragma omp parallel for schedule(static)
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double x = (i + 0.5) * grid.dx;
      const double y = (j + 0.5) * grid.dy;
      values[grid.flat(i, j)] = std::max(spline(x, y), floor);
    }
  }
  return {grid, std::move(values), "m2/(Pa s)"};
}

ScalarField permeability_field(const GeologySpec& spec, const Grid& grid) {
  return tps_interpolate(sample_control_points(spec, grid), grid, spec.perm_min / 10.0);
}

}  // namespace gwhp

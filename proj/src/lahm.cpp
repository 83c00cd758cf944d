#include "gwhp/lahm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"

namespace gwhp {

void LahmParams::validate() const {
  if (!(velocity > 0.0)) throw ValidationError("lahm: velocity must be positive");
  if (!(alpha_t > 0.0) || !(alpha_l >= alpha_t)) {
    throw ValidationError("lahm: require alpha_l >= alpha_t > 0");
  }
  if (!(thickness > 0.0)) throw ValidationError("lahm: thickness must be positive");
  if (!(porosity > 0.0 && porosity < 1.0)) throw ValidationError("lahm: porosity must be in (0, 1)");
  if (!(injection_rate > 0.0) || !(delta_t_inj > 0.0) || !(time > 0.0) || !(retardation > 0.0)) {
    throw ValidationError("lahm: injection_rate, delta_t_inj, time, retardation must be positive");
  }
}

void to_json(nlohmann::json& j, const LahmParams& p) {
  j = nlohmann::json{{"injection_rate", p.injection_rate}, {"delta_t_inj", p.delta_t_inj},
                     {"velocity", p.velocity},             {"alpha_l", p.alpha_l},
                     {"alpha_t", p.alpha_t},               {"thickness", p.thickness},
                     {"porosity", p.porosity},             {"time", p.time},
                     {"retardation", p.retardation}};
}

void from_json(const nlohmann::json& j, LahmParams& p) {
  LahmParams out;
  for (const auto& [key, value] : j.items()) {
    double* slot = nullptr;
    if (key == "injection_rate") slot = &out.injection_rate;
    else if (key == "delta_t_inj") slot = &out.delta_t_inj;
    else if (key == "velocity") slot = &out.velocity;
    else if (key == "alpha_l") slot = &out.alpha_l;
    else if (key == "alpha_t") slot = &out.alpha_t;
    else if (key == "thickness") slot = &out.thickness;
    else if (key == "porosity") slot = &out.porosity;
    else if (key == "time") slot = &out.time;
    else if (key == "retardation") slot = &out.retardation;
    else throw ValidationError("lahm: unknown key '" + key + "'");
    *slot = value.get<double>();
  }
  out.validate();
  p = out;
}

double lahm_delta_t(const LahmParams& p, double x, double y) {
  p.validate();
  if (x <= 0.0) return 0.0;
  const double front = p.velocity * p.time / p.retardation;
  const double spread = 2.0 * std::sqrt(p.velocity * p.alpha_l * p.time / p.retardation);
  const double r = std::sqrt(x * x + y * y * p.alpha_l / p.alpha_t);
  const double amplitude = p.delta_t_inj * p.injection_rate /
                           (4.0 * p.porosity * p.thickness * p.velocity *
                            std::sqrt(std::numbers::pi * p.alpha_t * x));
  return amplitude * std::exp(-y * y / (4.0 * p.alpha_t * x)) * std::erfc((r - front) / spread);
}

ScalarField lahm_field(const LahmParams& params, const Grid& grid, CellIndex well_cell,
                       double flow_angle, double ambient) {
  params.validate();
  grid.validate();
  const Point2 origin = cell_center(grid, well_cell.i, well_cell.j);
  const double c = std::cos(flow_angle);
  const double s = std::sin(flow_angle);
  std::vector<double> values(grid.cell_count());
#pragma omp parallel for schedule(static)
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double dx = (i + 0.5) * grid.dx - origin.x;
      const double dy = (j + 0.5) * grid.dy - origin.y;
      const double along = c * dx + s * dy;
      const double across = -s * dx + c * dy;
      const double surplus = std::min(lahm_delta_t(params, along, across), params.delta_t_inj);
      values[grid.flat(i, j)] = ambient + surplus;
    }
  }
  return {grid, std::move(values), "C"};
}

LahmSetup lahm_from_flow(const VectorField& velocity, const WellSpec& well, const SimParams& sim,
                         double time_seconds, double ambient) {
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < velocity.x().size(); ++k) {
    mx += velocity.x()[k];
    my += velocity.y()[k];
  }
  const auto n = static_cast<double>(velocity.x().size());
  mx /= n;
  my /= n;
  const double speed = std::hypot(mx, my);
  if (!(speed > 0.0)) throw ValidationError("lahm: ambient flow vanishes, plume direction undefined");
  LahmSetup setup;
  setup.params.injection_rate = volumetric_injection_rate(well, sim);
  setup.params.delta_t_inj = well.injection_temperature - ambient;
  setup.params.velocity = speed;
  setup.params.thickness = velocity.grid().thickness;
  setup.params.porosity = sim.porosity;
  setup.params.time = time_seconds;
  setup.flow_angle = std::atan2(my, mx);
  return setup;
}

}  // namespace gwhp

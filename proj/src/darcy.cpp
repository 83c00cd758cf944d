#include "gwhp/darcy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"

namespace gwhp {

void SimParams::validate() const {
  if (!(eta > 0) || !(kappa > 0) || !(enthalpy_ref > 0) || !(heat_capacity > 0) ||
      !(porosity > 0) || !(molar_mass > 0)) {
    throw ValidationError("sim params: all constants must be strictly positive");
  }
}

void WellSpec::validate(const Grid& grid, double ambient) const {
  if (cell.i < 0 || cell.i >= grid.nx || cell.j < 0 || cell.j >= grid.ny) {
    throw ValidationError("well: cell outside grid");
  }
  if (!(mass_rate > 0.0)) throw ValidationError("well: mass_rate must be positive");
  if (!(injection_temperature > ambient)) {
    throw ValidationError("well: injection_temperature must exceed ambient");
  }
}

void to_json(nlohmann::json& j, const WellSpec& well) {
  j = nlohmann::json{{"cell", {well.cell.i, well.cell.j}},
                     {"mass_rate", well.mass_rate},
                     {"injection_temperature", well.injection_temperature}};
}

void from_json(const nlohmann::json& j, WellSpec& well) {
  for (const auto& [key, _] : j.items()) {
    if (key != "cell" && key != "mass_rate" && key != "injection_temperature") {
      throw ValidationError("well: unknown key '" + key + "'");
    }
  }
  WellSpec out;
  if (j.contains("cell")) {
    const auto cell = j.at("cell").get<std::vector<int>>();
    if (cell.size() != 2) throw ValidationError("well: cell must be [i, j]");
    out.cell = {cell[0], cell[1]};
  }
  out.mass_rate = j.value("mass_rate", out.mass_rate);
  out.injection_temperature = j.value("injection_temperature", out.injection_temperature);
  well = out;
}

double molar_injection_rate(const WellSpec& well, const SimParams& params) {
  return well.mass_rate / params.molar_mass;
}

double volumetric_injection_rate(const WellSpec& well, const SimParams& params) {
  return molar_injection_rate(well, params) / (params.eta * 1000.0);
}

double well_heat_rate(const WellSpec& well, const SimParams& params, double ambient) {
  return volumetric_injection_rate(well, params) * params.heat_capacity *
         (well.injection_temperature - ambient);
}

void TransportConfig::validate() const {
  if (!(total_time_days > 0.0)) throw ValidationError("transport: total_time must be positive");
  if (!(cfl > 0.0) || cfl > 1.0) throw ValidationError("transport: cfl must be in (0, 1]");
  if (!(steady_tol >= 0.0)) throw ValidationError("transport: steady_tol must be >= 0");
}

double FaceFluxes::max_abs() const {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  for (double v : y) m = std::max(m, std::abs(v));
  return m;
}

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

namespace {

void require_positive(const ScalarField& permeability) {
  for (std::size_t k = 0; k < permeability.size(); ++k) {
    if (!(permeability[k] > 0.0)) {
      throw ValidationError("permeability must be strictly positive (flat index " +
                            std::to_string(k) + ")");
    }
  }
}

}  // namespace

ScalarField solve_pressure_system(const ScalarField& permeability,
                                  const std::function<double(double, double)>& boundary,
                                  const std::vector<double>& source) {
  const Grid& g = permeability.grid();
  if (g.nx < 2 || g.ny < 2) throw ValidationError("pressure: grid must be at least 2x2");
  if (source.size() != g.cell_count()) throw ValidationError("pressure: source size mismatch");
  require_positive(permeability);

  const double ax = g.dy * g.thickness;  // area of an x face
  const double ay = g.dx * g.thickness;
  const auto n = static_cast<Eigen::Index>(g.cell_count());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.cell_count() * 5);
  Eigen::VectorXd rhs(n);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const auto c = static_cast<Eigen::Index>(g.flat(i, j));
      const double kc = permeability(i, j);
      double diag = 0.0;
      double b = source[static_cast<std::size_t>(c)];
      auto couple = [&](int ni, int nj, double area, double dist) {
        const double t = harmonic_mean(kc, permeability(ni, nj)) * area / dist;
        diag += t;
        triplets.emplace_back(c, static_cast<Eigen::Index>(g.flat(ni, nj)), -t);
      };
      auto dirichlet = [&](double x, double y, double area, double half) {
        const double t = kc * area / half;
        diag += t;
        b += t * boundary(x, y);
      };
      const double xc = (i + 0.5) * g.dx;
      const double yc = (j + 0.5) * g.dy;
      if (i > 0) couple(i - 1, j, ax, g.dx); else dirichlet(0.0, yc, ax, 0.5 * g.dx);
      if (i + 1 < g.nx) couple(i + 1, j, ax, g.dx); else dirichlet(g.length_x(), yc, ax, 0.5 * g.dx);
      if (j > 0) couple(i, j - 1, ay, g.dy); else dirichlet(xc, 0.0, ay, 0.5 * g.dy);
      if (j + 1 < g.ny) couple(i, j + 1, ay, g.dy); else dirichlet(xc, g.length_y(), ay, 0.5 * g.dy);
      triplets.emplace_back(c, c, diag);
      rhs(c) = b;
    }
  }

  Eigen::SparseMatrix<double> matrix(n, n);
  matrix.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(matrix);
  if (solver.info() != Eigen::Success) {
    throw SolverError("pressure: factorization failed (operator not SPD)");
  }
  const Eigen::VectorXd p = solver.solve(rhs);
  const double rhs_norm = rhs.norm();
  const double residual = (matrix * p - rhs).norm();
  const double relative = rhs_norm > 0.0 ? residual / rhs_norm : residual;
  if (solver.info() != Eigen::Success || !std::isfinite(relative) || relative > 1e-10) {
    std::ostringstream msg;
    msg << "pressure: linear solve did not converge, relative residual " << relative;
    throw SolverError(msg.str());
  }
  return {g, std::vector<double>(p.data(), p.data() + n), "Pa"};
}

ScalarField solve_pressure(const ScalarField& permeability, const PressureBoundary& gradient,
                           const std::optional<WellSpec>& well, const SimParams& params) {
  params.validate();
  const Grid& g = permeability.grid();
  std::vector<double> source(g.cell_count(), 0.0);
  if (well) {
    well->validate(g, -std::numeric_limits<double>::infinity());
    source[g.flat(well->cell.i, well->cell.j)] = volumetric_injection_rate(*well, params);
  }
  return solve_pressure_system(
      permeability, [&](double x, double y) { return gradient.value(x, y); }, source);
}

FaceFluxes face_fluxes(const ScalarField& permeability, const ScalarField& pressure,
                       const std::optional<PressureBoundary>& boundary) {
  require_same_grid(permeability.grid(), pressure.grid(), "face_fluxes");
  const Grid& g = permeability.grid();
  const double ax = g.dy * g.thickness;
  const double ay = g.dx * g.thickness;
  FaceFluxes f{g, std::vector<double>(static_cast<std::size_t>((g.nx + 1) * g.ny), 0.0),
               std::vector<double>(static_cast<std::size_t>(g.nx * (g.ny + 1)), 0.0)};

  for (int j = 0; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const double k = harmonic_mean(permeability(i - 1, j), permeability(i, j));
      f.fx(i, j) = -k * (pressure(i, j) - pressure(i - 1, j)) / g.dx * ax;
    }
    const double yc = (j + 0.5) * g.dy;
    if (boundary) {
      f.fx(0, j) = -permeability(0, j) * (pressure(0, j) - boundary->value(0.0, yc)) /
                   (0.5 * g.dx) * ax;
      f.fx(g.nx, j) = -permeability(g.nx - 1, j) *
                      (boundary->value(g.length_x(), yc) - pressure(g.nx - 1, j)) /
                      (0.5 * g.dx) * ax;
    } else if (g.nx > 1) {
      f.fx(0, j) = -permeability(0, j) * (pressure(1, j) - pressure(0, j)) / g.dx * ax;
      f.fx(g.nx, j) = -permeability(g.nx - 1, j) *
                      (pressure(g.nx - 1, j) - pressure(g.nx - 2, j)) / g.dx * ax;
    }
  }
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 1; j < g.ny; ++j) {
      const double k = harmonic_mean(permeability(i, j - 1), permeability(i, j));
      f.fy(i, j) = -k * (pressure(i, j) - pressure(i, j - 1)) / g.dy * ay;
    }
    const double xc = (i + 0.5) * g.dx;
    if (boundary) {
      f.fy(i, 0) = -permeability(i, 0) * (pressure(i, 0) - boundary->value(xc, 0.0)) /
                   (0.5 * g.dy) * ay;
      f.fy(i, g.ny) = -permeability(i, g.ny - 1) *
                      (boundary->value(xc, g.length_y()) - pressure(i, g.ny - 1)) /
                      (0.5 * g.dy) * ay;
    } else if (g.ny > 1) {
      f.fy(i, 0) = -permeability(i, 0) * (pressure(i, 1) - pressure(i, 0)) / g.dy * ay;
      f.fy(i, g.ny) = -permeability(i, g.ny - 1) *
                      (pressure(i, g.ny - 1) - pressure(i, g.ny - 2)) / g.dy * ay;
    }
  }
  return f;
}

VectorField cell_velocity(const FaceFluxes& fluxes) {
  const Grid& g = fluxes.grid;
  const double ax = g.dy * g.thickness;
  const double ay = g.dx * g.thickness;
  std::vector<double> qx(g.cell_count());
  std::vector<double> qy(g.cell_count());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      qx[g.flat(i, j)] = 0.5 * (fluxes.fx(i, j) + fluxes.fx(i + 1, j)) / ax;
      qy[g.flat(i, j)] = 0.5 * (fluxes.fy(i, j) + fluxes.fy(i, j + 1)) / ay;
    }
  }
  return {g, std::move(qx), std::move(qy), "m/s"};
}

VectorField darcy_velocity(const ScalarField& permeability, const ScalarField& pressure,
                           const std::optional<PressureBoundary>& boundary) {
  return cell_velocity(face_fluxes(permeability, pressure, boundary));
}

FaceFluxes face_fluxes_from_velocity(const VectorField& velocity) {
  const Grid& g = velocity.grid();
  const double ax = g.dy * g.thickness;
  const double ay = g.dx * g.thickness;
  FaceFluxes f{g, std::vector<double>(static_cast<std::size_t>((g.nx + 1) * g.ny), 0.0),
               std::vector<double>(static_cast<std::size_t>(g.nx * (g.ny + 1)), 0.0)};
  const auto vx = velocity.x();
  const auto vy = velocity.y();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const int l = std::max(i - 1, 0);
      const int r = std::min(i, g.nx - 1);
      f.fx(i, j) = 0.5 * (vx[g.flat(l, j)] + vx[g.flat(r, j)]) * ax;
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int b = std::max(j - 1, 0);
      const int t = std::min(j, g.ny - 1);
      f.fy(i, j) = 0.5 * (vy[g.flat(i, b)] + vy[g.flat(i, t)]) * ay;
    }
  }
  return f;
}

std::vector<double> mass_imbalance(const FaceFluxes& fluxes, const std::optional<WellSpec>& well,
                                   const SimParams& params) {
  const Grid& g = fluxes.grid;
  std::vector<double> out(g.cell_count());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      out[g.flat(i, j)] = fluxes.fx(i + 1, j) - fluxes.fx(i, j) + fluxes.fy(i, j + 1) -
                          fluxes.fy(i, j);
    }
  }
  if (well) out[g.flat(well->cell.i, well->cell.j)] -= volumetric_injection_rate(*well, params);
  return out;
}

namespace {

/// Per-cell sum of coefficients multiplying (T_neighbor - T_cell), i.e. the
/// denominator of the positivity bound.
struct CellCoefficients {
  double inflow = 0.0;
  double diffusion = 0.0;
};

double diffusion_conductance_x(const Grid& g, const SimParams& p) {
  return p.porosity * p.diffusivity() * g.dy * g.thickness / g.dx;
}
double diffusion_conductance_y(const Grid& g, const SimParams& p) {
  return p.porosity * p.diffusivity() * g.dx * g.thickness / g.dy;
}

}  // namespace

double stable_time_step(const FaceFluxes& fluxes, const std::optional<WellSpec>& well,
                        const SimParams& params) {
  const Grid& g = fluxes.grid;
  const double cx = diffusion_conductance_x(g, params);
  const double cy = diffusion_conductance_y(g, params);
  const double capacity = params.porosity * g.cell_volume();
  const double qw = well ? volumetric_injection_rate(*well, params) : 0.0;
  double dt = std::numeric_limits<double>::infinity();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      double rate = 0.0;
      rate += std::max(fluxes.fx(i, j), 0.0) + std::max(-fluxes.fx(i + 1, j), 0.0);
      rate += std::max(fluxes.fy(i, j), 0.0) + std::max(-fluxes.fy(i, j + 1), 0.0);
      rate += cx * ((i > 0) + (i + 1 < g.nx)) + cy * ((j > 0) + (j + 1 < g.ny));
      if (well && well->cell.i == i && well->cell.j == j) rate += qw;
      if (rate > 0.0) dt = std::min(dt, capacity / rate);
    }
  }
  return dt;
}

namespace {

void check_step(const ScalarField& temperature, const FaceFluxes& fluxes,
                const std::optional<WellSpec>& well, const SimParams& params, double dt) {
  require_same_grid(temperature.grid(), fluxes.grid, "advance_temperature");
  params.validate();
  if (!(dt > 0.0)) throw ValidationError("advance_temperature: dt must be positive");
  if (well) well->validate(fluxes.grid, -std::numeric_limits<double>::infinity());
  const double limit = stable_time_step(fluxes, well, params);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "advance_temperature: CFL violation, dt " << dt << " s exceeds stable limit " << limit
        << " s";
    throw ValidationError(msg.str());
  }
}

}  // namespace

ScalarField advance_temperature(const ScalarField& temperature, const FaceFluxes& fluxes,
                                const std::optional<WellSpec>& well, const SimParams& params,
                                double dt, double inflow_temperature) {
  check_step(temperature, fluxes, well, params, dt);
  const Grid& g = fluxes.grid;
  const double cx = diffusion_conductance_x(g, params);
  const double cy = diffusion_conductance_y(g, params);
  const double scale = dt / (params.porosity * g.cell_volume());
  const double qw = well ? volumetric_injection_rate(*well, params) : 0.0;
  const int wi = well ? well->cell.i : -1;
  const int wj = well ? well->cell.j : -1;
  const double t_inj = well ? well->injection_temperature : 0.0;

  const auto told = temperature.values();
  std::vector<double> tnew(g.cell_count());
  const int nx = g.nx;
  const int ny = g.ny;

#pragma omp parallel for schedule(static)
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double tc = told[g.flat(i, j)];
      const double tw = i > 0 ? told[g.flat(i - 1, j)] : inflow_temperature;
      const double te = i + 1 < nx ? told[g.flat(i + 1, j)] : inflow_temperature;
      const double ts = j > 0 ? told[g.flat(i, j - 1)] : inflow_temperature;
      const double tn = j + 1 < ny ? told[g.flat(i, j + 1)] : inflow_temperature;

      double acc = 0.0;
      // upwind: only inflow faces contribute in the non-conservative form
      acc += std::max(fluxes.fx(i, j), 0.0) * (tw - tc);
      acc += std::max(-fluxes.fx(i + 1, j), 0.0) * (te - tc);
      acc += std::max(fluxes.fy(i, j), 0.0) * (ts - tc);
      acc += std::max(-fluxes.fy(i, j + 1), 0.0) * (tn - tc);
      if (i > 0) acc += cx * (tw - tc);
      if (i + 1 < nx) acc += cx * (te - tc);
      if (j > 0) acc += cy * (ts - tc);
      if (j + 1 < ny) acc += cy * (tn - tc);
      if (i == wi && j == wj) acc += qw * (t_inj - tc);
      tnew[g.flat(i, j)] = tc + scale * acc;
    }
  }
  return {g, std::move(tnew), "C"};
}

ScalarField advance_temperature(const ScalarField& temperature, const VectorField& velocity,
                                const std::optional<WellSpec>& well, const SimParams& params,
                                double dt, double inflow_temperature) {
  return advance_temperature(temperature, face_fluxes_from_velocity(velocity), well, params, dt,
                             inflow_temperature);
}

namespace reference {

ScalarField advance_temperature(const ScalarField& temperature, const FaceFluxes& fluxes,
                                const std::optional<WellSpec>& well, const SimParams& params,
                                double dt, double inflow_temperature) {
  check_step(temperature, fluxes, well, params, dt);
  const Grid& g = fluxes.grid;
  const auto told = temperature.values();
  std::vector<double> rate(g.cell_count(), 0.0);
  const double kx = diffusion_conductance_x(g, params);
  const double ky = diffusion_conductance_y(g, params);

  auto face = [&](int left, int right, double flux, double cond) {
    // left / right are flat indices or -1 for the outside
    const double tl = left >= 0 ? told[static_cast<std::size_t>(left)] : inflow_temperature;
    const double tr = right >= 0 ? told[static_cast<std::size_t>(right)] : inflow_temperature;
    if (flux > 0.0 && right >= 0) rate[static_cast<std::size_t>(right)] += flux * (tl - tr);
    if (flux < 0.0 && left >= 0) rate[static_cast<std::size_t>(left)] += -flux * (tr - tl);
    if (left >= 0 && right >= 0) {
      rate[static_cast<std::size_t>(left)] += cond * (tr - tl);
      rate[static_cast<std::size_t>(right)] += cond * (tl - tr);
    }
  };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const int l = i > 0 ? static_cast<int>(g.flat(i - 1, j)) : -1;
      const int r = i < g.nx ? static_cast<int>(g.flat(i, j)) : -1;
      face(l, r, fluxes.fx(i, j), kx);
    }
  }
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int b = j > 0 ? static_cast<int>(g.flat(i, j - 1)) : -1;
      const int t = j < g.ny ? static_cast<int>(g.flat(i, j)) : -1;
      face(b, t, fluxes.fy(i, j), ky);
    }
  }
  if (well) {
    const auto w = g.flat(well->cell.i, well->cell.j);
    rate[w] += volumetric_injection_rate(*well, params) * (well->injection_temperature - told[w]);
  }
  std::vector<double> tnew(g.cell_count());
  const double capacity = params.porosity * g.cell_volume();
  for (std::size_t k = 0; k < tnew.size(); ++k) tnew[k] = told[k] + dt * rate[k] / capacity;
  return {g, std::move(tnew), "C"};
}

}  // namespace reference

void ScenarioSpec::validate(double ambient) const {
  grid.validate();
  geology.validate();
  well.validate(grid, ambient);
}

void to_json(nlohmann::json& j, const ScenarioSpec& spec) {
  j = nlohmann::json{{"grid", spec.grid}, {"geology", spec.geology}, {"well", spec.well}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& spec) {
  for (const auto& [key, _] : j.items()) {
    if (key != "grid" && key != "geology" && key != "well" && key != "lahm") {
      throw ValidationError("scenario: unknown key '" + key + "'");
    }
  }
  ScenarioSpec out;
  if (j.contains("grid")) out.grid = j.at("grid").get<Grid>();
  out.well.cell = center_cell_index(out.grid);
  if (j.contains("geology")) out.geology = j.at("geology").get<GeologySpec>();
  if (j.contains("well")) {
    WellSpec well = j.at("well").get<WellSpec>();
    if (!j.at("well").contains("cell")) well.cell = center_cell_index(out.grid);
    out.well = well;
  }
  spec = std::move(out);
}

FlowSolution solve_flow(const ScenarioSpec& spec, const SimParams& params) {
  ScalarField permeability = permeability_field(spec.geology, spec.grid);
  const PressureBoundary boundary{spec.geology.gradient_x, spec.geology.gradient_y};
  ScalarField pressure = solve_pressure(permeability, boundary, spec.well, params);
  FaceFluxes fluxes = face_fluxes(permeability, pressure, boundary);
  VectorField velocity = cell_velocity(fluxes);
  return {std::move(permeability), std::move(pressure), std::move(fluxes), std::move(velocity)};
}

Sample run_scenario(const ScenarioSpec& spec, const TransportConfig& config,
                    const SimParams& params) {
  config.validate();
  params.validate();
  spec.validate(config.ambient_temperature);
  FlowSolution flow = solve_flow(spec, params);

  const std::optional<WellSpec> well = spec.well;
  const double total = config.total_time_days * 86400.0;
  const double dt_max = config.cfl * stable_time_step(flow.fluxes, well, params);

  ScalarField temperature(spec.grid, config.ambient_temperature, "C");
  RunStats stats;
  while (stats.simulated_seconds < total) {
    const double dt = std::min(dt_max, total - stats.simulated_seconds);
    ScalarField next = advance_temperature(temperature, flow.fluxes, well, params, dt,
                                           config.ambient_temperature);
    double change = 0.0;
    const auto a = temperature.values();
    const auto b = next.values();
    for (std::size_t k = 0; k < a.size(); ++k) change = std::max(change, std::abs(b[k] - a[k]));
    temperature = std::move(next);
    stats.simulated_seconds += dt;
    ++stats.steps;
    stats.last_max_change = change;
    if (change < config.steady_tol) {
      stats.steady = true;
      break;
    }
  }
  return {spec, std::move(flow.permeability), std::move(flow.pressure), std::move(flow.velocity),
          std::move(temperature), stats};
}

}  // namespace gwhp

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gwhp/field.hpp"
#include "gwhp/geogen.hpp"

namespace gwhp {

/// Physical constants of the flow/heat model.
struct SimParams {
  double eta = 55.3454010547;        // molar density of water, kmol/m^3
  double kappa = 0.5;                // thermal conductivity, W/(m K)
  double enthalpy_ref = 1.134945;    // specific enthalpy of water at 10 C, kJ/mol
  double heat_capacity = 4.0e6;      // volumetric heat capacity, J/(m^3 K)
  double porosity = 0.2;
  double molar_mass = 0.018015;      // kg/mol

  void validate() const;
  /// Thermal diffusivity kappa / heat_capacity, m^2/s.
  [[nodiscard]] double diffusivity() const { return kappa / heat_capacity; }
};

struct WellSpec {
  CellIndex cell{32, 32};
  double mass_rate = 0.05;             // kg/s
  double injection_temperature = 15.0;  // C

  void validate(const Grid& grid, double ambient) const;
};

void to_json(nlohmann::json& j, const WellSpec& well);
void from_json(const nlohmann::json& j, WellSpec& well);

/// Injection mass rate converted to mol/s.
double molar_injection_rate(const WellSpec& well, const SimParams& params);
/// Injection mass rate converted to m^3/s through the molar density.
double volumetric_injection_rate(const WellSpec& well, const SimParams& params);
/// Heat carried in above ambient, W.
double well_heat_rate(const WellSpec& well, const SimParams& params, double ambient);

struct TransportConfig {
  double total_time_days = 720.0;
  /// Fraction of the per-cell positivity limit used for the adaptive step.
  double cfl = 0.9;
  double steady_tol = 1e-6;          // K per step
  double ambient_temperature = 10.0;  // C

  void validate() const;
};

/// Linear Dirichlet pressure P(x, y) = gx * x + gy * y on the domain boundary.
struct PressureBoundary {
  double gx = 0.0;
  double gy = 0.0;
  [[nodiscard]] double value(double x, double y) const { return gx * x + gy * y; }
};

/// Volumetric fluxes (m^3/s) through cell faces, positive along +x / +y.
/// x faces: (nx + 1) * ny entries, index j * (nx + 1) + i is the face left of cell i.
/// y faces: nx * (ny + 1) entries, index j * nx + i is the face below cell (i, j).
struct FaceFluxes {
  Grid grid;
  std::vector<double> x;
  std::vector<double> y;

  [[nodiscard]] double& fx(int i, int j) { return x[static_cast<std::size_t>(j * (grid.nx + 1) + i)]; }
  [[nodiscard]] double fx(int i, int j) const { return x[static_cast<std::size_t>(j * (grid.nx + 1) + i)]; }
  [[nodiscard]] double& fy(int i, int j) { return y[static_cast<std::size_t>(j * grid.nx + i)]; }
  [[nodiscard]] double fy(int i, int j) const { return y[static_cast<std::size_t>(j * grid.nx + i)]; }
  [[nodiscard]] double max_abs() const;
};

/// Harmonic mean used for face transmissibilities.
double harmonic_mean(double a, double b);

/// General cell-centered solve of -div(K grad P) = source on the grid with
/// Dirichlet data on all four sides. `source` holds m^3/s per cell (already
/// integrated over the cell volume). Throws SolverError if the discrete
/// residual exceeds 1e-10 relative.
ScalarField solve_pressure_system(const ScalarField& permeability,
                                  const std::function<double(double, double)>& boundary,
                                  const std::vector<double>& source);

/// Pressure for a permeability field, regional gradient and optional injection well.
ScalarField solve_pressure(const ScalarField& permeability, const PressureBoundary& gradient,
                           const std::optional<WellSpec>& well, const SimParams& params);

/// Face fluxes q.n A from harmonic-mean transmissibilities. Without boundary
/// data the boundary-face gradient is copied from the adjacent interior face.
FaceFluxes face_fluxes(const ScalarField& permeability, const ScalarField& pressure,
                       const std::optional<PressureBoundary>& boundary = std::nullopt);

/// Cell-centered Darcy velocity q = -K grad P: mean of the two face velocities per axis.
VectorField darcy_velocity(const ScalarField& permeability, const ScalarField& pressure,
                           const std::optional<PressureBoundary>& boundary = std::nullopt);
VectorField cell_velocity(const FaceFluxes& fluxes);

/// Face fluxes from a cell-centered velocity: adjacent cells averaged,
/// boundary faces take the boundary cell's value.
FaceFluxes face_fluxes_from_velocity(const VectorField& velocity);

/// Per-cell net outflow minus injected volume rate (m^3/s).
std::vector<double> mass_imbalance(const FaceFluxes& fluxes, const std::optional<WellSpec>& well,
                                   const SimParams& params);

/// Largest explicit step keeping every update a convex combination.
double stable_time_step(const FaceFluxes& fluxes, const std::optional<WellSpec>& well,
                        const SimParams& params);

/// One explicit step of upwind advection (speed q / porosity) plus central
/// diffusion, with the well mixing injected water at injection_temperature
/// into its cell. Inflow boundaries carry `inflow_temperature`; boundaries
/// are diffusion-free. Throws ValidationError if dt exceeds stable_time_step.
ScalarField advance_temperature(const ScalarField& temperature, const FaceFluxes& fluxes,
                                const std::optional<WellSpec>& well, const SimParams& params,
                                double dt, double inflow_temperature = 10.0);
ScalarField advance_temperature(const ScalarField& temperature, const VectorField& velocity,
                                const std::optional<WellSpec>& well, const SimParams& params,
                                double dt, double inflow_temperature = 10.0);

/// Everything needed to reproduce one simulation.
struct ScenarioSpec {
  Grid grid;
  GeologySpec geology;
  WellSpec well;

  void validate(double ambient) const;
};

void to_json(nlohmann::json& j, const ScenarioSpec& spec);
void from_json(const nlohmann::json& j, ScenarioSpec& spec);

struct RunStats {
  int steps = 0;
  double simulated_seconds = 0.0;
  double last_max_change = 0.0;
  bool steady = false;
};

struct Sample {
  ScenarioSpec spec;
  ScalarField permeability;
  ScalarField pressure;
  VectorField velocity;
  ScalarField temperature;
  RunStats stats;
};

/// Geology, pressure and velocity for a scenario (no heat transport).
struct FlowSolution {
  ScalarField permeability;
  ScalarField pressure;
  FaceFluxes fluxes;
  VectorField velocity;
};

FlowSolution solve_flow(const ScenarioSpec& spec, const SimParams& params = {});

/// geogen -> pressure -> velocity -> explicit transport until total time or
/// until the largest per-step change drops below steady_tol.
Sample run_scenario(const ScenarioSpec& spec, const TransportConfig& config = {},
                    const SimParams& params = {});

namespace reference {

/// Serial face-loop formulation of advance_temperature, kept for cross-checking.
ScalarField advance_temperature(const ScalarField& temperature, const FaceFluxes& fluxes,
                                const std::optional<WellSpec>& well, const SimParams& params,
                                double dt, double inflow_temperature = 10.0);

}  // namespace reference

}  // namespace gwhp

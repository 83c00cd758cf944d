#pragma once

#include <nlohmann/json_fwd.hpp>

#include "gwhp/darcy.hpp"
#include "gwhp/field.hpp"

namespace gwhp {

/// Inputs of the analytical moving-line-source plume (LAHM).
struct LahmParams {
  double injection_rate = 5.0e-5;   // m^3/s
  double delta_t_inj = 5.0;         // K above ambient
  double velocity = 1.0e-6;         // ambient Darcy speed, m/s
  double alpha_l = 1.8;             // longitudinal dispersivity, m
  double alpha_t = 0.18;            // transverse dispersivity, m
  double thickness = 1.0;           // m
  double porosity = 0.2;
  double time = 720.0 * 86400.0;    // s
  double retardation = 2.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const LahmParams& p);
void from_json(const nlohmann::json& j, LahmParams& p);

/// Temperature surplus at (x, y) relative to the injection point, x along
/// the ambient flow:
///
///   dT = dT_inj Q / (4 n b v sqrt(pi aT x)) * exp(-y^2 / (4 aT x))
///        * erfc((r - v t / R) / (2 sqrt(v aL t / R))),   r = sqrt(x^2 + y^2 aL / aT)
///
/// and 0 for x <= 0 (no upstream plume).
double lahm_delta_t(const LahmParams& params, double x, double y);

/// Ambient plus the surplus evaluated in the frame rotated by `flow_angle`
/// (radians, counter-clockwise from +x) around the well cell center. The
/// surplus is capped at delta_t_inj.
ScalarField lahm_field(const LahmParams& params, const Grid& grid, CellIndex well_cell,
                       double flow_angle, double ambient = 10.0);

/// LAHM inputs derived from a simulated flow: domain-mean velocity gives
/// speed and direction; injection rate from the well.
struct LahmSetup {
  LahmParams params;
  double flow_angle = 0.0;
};

/// Throws ValidationError if the mean flow vanishes.
LahmSetup lahm_from_flow(const VectorField& velocity, const WellSpec& well,
                         const SimParams& sim, double time_seconds = 720.0 * 86400.0,
                         double ambient = 10.0);

}  // namespace gwhp

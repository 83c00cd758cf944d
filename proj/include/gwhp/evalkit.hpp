#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gwhp/darcy.hpp"
#include "gwhp/dataset.hpp"
#include "gwhp/field.hpp"
#include "gwhp/render.hpp"
#include "gwhp/surrogate.hpp"

namespace gwhp {

/// sum |p - t| / sum |t| over all cells. Inputs are temperature offsets
/// (T - 10 C). Throws ValidationError when the target is identically zero.
double relative_error(std::span<const double> predicted, std::span<const double> target);
/// Same metric on temperature fields in C; the ambient offset is removed first.
double relative_error(const ScalarField& predicted, const ScalarField& target);

/// Signed predicted - target per cell, in K.
ScalarField error_map(const ScalarField& predicted, const ScalarField& target);

struct ErrorPeak {
  double value = 0.0;  // |error| in K
  CellIndex cell;
};
ErrorPeak max_abs_error(const ScalarField& predicted, const ScalarField& target);

/// Millisecond percentiles by nearest rank.
struct LatencyStats {
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};
LatencyStats latency_stats(std::vector<double> samples_ms);

/// One predicted/target pair in C.
struct EvalCase {
  std::string id;
  ScalarField predicted;
  ScalarField target;
  std::optional<VectorField> velocity;  // enables the LAHM overlay
};

struct SampleMetrics {
  std::string id;
  double relative_error = 0.0;
  double max_abs_error = 0.0;
  CellIndex max_error_cell;
  double predicted_min = 0.0;
  double predicted_max = 0.0;
};

struct EvalReport {
  std::vector<SampleMetrics> samples;
  /// Pooled over every cell of every sample.
  double aggregate_relative_error = 0.0;
  double mean_relative_error = 0.0;
  double max_abs_error = 0.0;
  double predicted_min = 0.0;
  double predicted_max = 0.0;
  LatencyStats latency;
  std::vector<ScalarField> error_fields;
};

void to_json(nlohmann::json& j, const SampleMetrics& m);
/// Error fields are omitted from the JSON.
void to_json(nlohmann::json& j, const EvalReport& r);

struct EvalOptions {
  /// Writes `<id>.png` triptychs here when set.
  std::optional<std::filesystem::path> render_dir;
  TriptychStyle style;
  WellSpec well;
  SimParams sim;
  bool lahm_overlay = true;
};

EvalReport evaluate_cases(std::span<const EvalCase> cases, const EvalOptions& options = {});

/// Runs infer on every test pair (timed), then evaluate_cases. `stats` are
/// the ones the pairs were normalized with.
EvalReport evaluate_test_set(const SurrogateModel& model, std::span<const TrainingPair> test,
                             const NormStats& stats, const EvalOptions& options = {});

/// Rebuilds raw velocity (m/s) and temperature (C) fields from a normalized pair.
VectorField pair_velocity(const TrainingPair& pair, const NormStats& stats, const Grid& grid);
ScalarField pair_temperature(const TrainingPair& pair, const NormStats& stats, const Grid& grid);

/// One-line-per-sample table plus the aggregate row.
std::string format_report_table(const EvalReport& report);

}  // namespace gwhp

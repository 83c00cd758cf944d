#include "gwhp/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>

#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"
#include "gwhp/lahm.hpp"

namespace gwhp {

double relative_error(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) {
    throw ValidationError("relative_error: predicted and target sizes differ");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    num += std::abs(predicted[k] - target[k]);
    den += std::abs(target[k]);
  }
  if (!(den > 0.0)) throw ValidationError("relative_error: target is identically zero");
  return num / den;
}

double relative_error(const ScalarField& predicted, const ScalarField& target) {
  require_same_grid(predicted.grid(), target.grid(), "relative_error");
  std::vector<double> p(predicted.values().begin(), predicted.values().end());
  std::vector<double> t(target.values().begin(), target.values().end());
  for (auto& v : p) v -= kAmbientTemperature;
  for (auto& v : t) v -= kAmbientTemperature;
  return relative_error(p, t);
}

ScalarField error_map(const ScalarField& predicted, const ScalarField& target) {
  require_same_grid(predicted.grid(), target.grid(), "error_map");
  std::vector<double> diff(predicted.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = predicted[k] - target[k];
  return ScalarField(predicted.grid(), std::move(diff), "K");
}

ErrorPeak max_abs_error(const ScalarField& predicted, const ScalarField& target) {
  require_same_grid(predicted.grid(), target.grid(), "max_abs_error");
  ErrorPeak peak;
  std::size_t at = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const double e = std::abs(predicted[k] - target[k]);
    if (e > peak.value) {
      peak.value = e;
      at = k;
    }
  }
  const Grid& g = predicted.grid();
  peak.cell = {static_cast<int>(at % static_cast<std::size_t>(g.nx)),
               static_cast<int>(at / static_cast<std::size_t>(g.nx))};
  return peak;
}

LatencyStats latency_stats(std::vector<double> samples_ms) {
  LatencyStats s;
  s.count = samples_ms.size();
  if (samples_ms.empty()) return s;
  std::sort(samples_ms.begin(), samples_ms.end());
  auto rank = [&](double q) {
    const auto n = samples_ms.size();
    auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    return samples_ms[std::clamp<std::size_t>(r, 1, n) - 1];
  };
  double sum = 0.0;
  for (double v : samples_ms) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  s.p50 = rank(0.50);
  s.p90 = rank(0.90);
  s.p99 = rank(0.99);
  s.max = samples_ms.back();
  return s;
}

void to_json(nlohmann::json& j, const SampleMetrics& m) {
  j = nlohmann::json{{"id", m.id},
                     {"relative_error", m.relative_error},
                     {"max_abs_error", m.max_abs_error},
                     {"max_error_cell", {m.max_error_cell.i, m.max_error_cell.j}},
                     {"predicted_min", m.predicted_min},
                     {"predicted_max", m.predicted_max}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{
      {"samples", r.samples},
      {"aggregate_relative_error", r.aggregate_relative_error},
      {"mean_relative_error", r.mean_relative_error},
      {"max_abs_error", r.max_abs_error},
      {"predicted_min", r.predicted_min},
      {"predicted_max", r.predicted_max},
      {"latency_ms",
       {{"count", r.latency.count}, {"mean", r.latency.mean}, {"p50", r.latency.p50},
        {"p90", r.latency.p90}, {"p99", r.latency.p99}, {"max", r.latency.max}}}};
}

EvalReport evaluate_cases(std::span<const EvalCase> cases, const EvalOptions& options) {
  EvalReport report;
  if (cases.empty()) throw ValidationError("evaluate: no cases");
  if (options.render_dir) std::filesystem::create_directories(*options.render_dir);
  report.samples.resize(cases.size());
  report.error_fields.resize(cases.size());
  std::vector<double> num(cases.size());
  std::vector<double> den(cases.size());
  for (const auto& ec : cases) require_same_grid(ec.predicted.grid(), ec.target.grid(), "evaluate");
  std::vector<std::exception_ptr> failures(cases.size());

  const auto n = static_cast<std::ptrdiff_t>(cases.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < n; ++c) {
    const auto& ec = cases[static_cast<std::size_t>(c)];
    double a = 0.0;
    double b = 0.0;
    for (std::size_t k = 0; k < ec.target.size(); ++k) {
      const double t = ec.target[k] - kAmbientTemperature;
      a += std::abs(ec.predicted[k] - ec.target[k]);
      b += std::abs(t);
    }
    num[static_cast<std::size_t>(c)] = a;
    den[static_cast<std::size_t>(c)] = b;
    auto& m = report.samples[static_cast<std::size_t>(c)];
    m.id = ec.id;
    m.relative_error = b > 0.0 ? a / b : 0.0;
    const auto peak = max_abs_error(ec.predicted, ec.target);
    m.max_abs_error = peak.value;
    m.max_error_cell = peak.cell;
    m.predicted_min = ec.predicted.min();
    m.predicted_max = ec.predicted.max();
    report.error_fields[static_cast<std::size_t>(c)] = error_map(ec.predicted, ec.target);

    if (options.render_dir) {
      std::optional<ScalarField> overlay;
      if (options.lahm_overlay && ec.velocity) {
        try {
          const auto setup = lahm_from_flow(*ec.velocity, options.well, options.sim);
          overlay = lahm_field(setup.params, ec.target.grid(), options.well.cell, setup.flow_angle,
                               options.style.ambient);
        } catch (const ValidationError&) {
          // no mean flow, no analytical plume to draw
        }
      }
      try {
        write_png(*options.render_dir / (ec.id + ".png"),
                  render_triptych(ec.predicted, ec.target, overlay, options.style));
      } catch (...) {
        failures[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  double total_num = 0.0;
  double total_den = 0.0;
  double sum_rel = 0.0;
  report.predicted_min = report.samples.front().predicted_min;
  report.predicted_max = report.samples.front().predicted_max;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    total_num += num[c];
    total_den += den[c];
    sum_rel += report.samples[c].relative_error;
    report.max_abs_error = std::max(report.max_abs_error, report.samples[c].max_abs_error);
    report.predicted_min = std::min(report.predicted_min, report.samples[c].predicted_min);
    report.predicted_max = std::max(report.predicted_max, report.samples[c].predicted_max);
  }
  if (!(total_den > 0.0)) throw ValidationError("evaluate: targets are identically ambient");
  report.aggregate_relative_error = total_num / total_den;
  report.mean_relative_error = sum_rel / static_cast<double>(cases.size());
  return report;
}

VectorField pair_velocity(const TrainingPair& pair, const NormStats& stats, const Grid& grid) {
  if (grid.nx != pair.nx || grid.ny != pair.ny) {
    throw ValidationError("pair_velocity: grid does not match the pair");
  }
  const auto raw = denormalize_input(pair.input, stats);
  const auto n = static_cast<std::ptrdiff_t>(pair.plane());
  return VectorField(grid, std::vector<double>(raw.begin(), raw.begin() + n),
                     std::vector<double>(raw.begin() + n, raw.end()), "m/s");
}

ScalarField pair_temperature(const TrainingPair& pair, const NormStats& stats, const Grid& grid) {
  if (grid.nx != pair.nx || grid.ny != pair.ny) {
    throw ValidationError("pair_temperature: grid does not match the pair");
  }
  return ScalarField(grid, denormalize_target(pair.target, stats), "C");
}

EvalReport evaluate_test_set(const SurrogateModel& model, std::span<const TrainingPair> test,
                             const NormStats& stats, const EvalOptions& options) {
  if (test.empty()) throw ValidationError("evaluate_test_set: empty test split");
  std::vector<EvalCase> cases;
  std::vector<double> latency;
  cases.reserve(test.size());
  for (const auto& pair : test) {
    Grid grid;
    grid.nx = pair.nx;
    grid.ny = pair.ny;
    auto velocity = pair_velocity(pair, stats, grid);
    const auto t0 = std::chrono::steady_clock::now();
    auto predicted = infer(model, velocity);
    latency.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    cases.push_back({pair.source_id, std::move(predicted), pair_temperature(pair, stats, grid),
                     std::move(velocity)});
  }
  auto report = evaluate_cases(cases, options);
  report.latency = latency_stats(std::move(latency));
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %12s %12s %10s %10s\n", "sample", "rel_error", "max_abs_K",
                "min_C", "max_C");
  out += line;
  for (const auto& m : report.samples) {
    std::snprintf(line, sizeof line, "%-24s %12.5f %12.4f %10.3f %10.3f\n", m.id.c_str(),
                  m.relative_error, m.max_abs_error, m.predicted_min, m.predicted_max);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-24s %12.5f %12.4f %10.3f %10.3f\n", "aggregate",
                report.aggregate_relative_error, report.max_abs_error, report.predicted_min,
                report.predicted_max);
  out += line;
  if (report.latency.count > 0) {
    std::snprintf(line, sizeof line, "latency ms: p50 %.2f  p90 %.2f  p99 %.2f  max %.2f (n=%zu)\n",
                  report.latency.p50, report.latency.p90, report.latency.p99, report.latency.max,
                  report.latency.count);
    out += line;
  }
  return out;
}

}  // namespace gwhp

// Acceptance suite: one PASS/FAIL line per criterion. Run with criterion
// names as arguments to select a subset; exits nonzero if any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gwhp/container.hpp"
#include "gwhp/darcy.hpp"
#include "gwhp/dataset.hpp"
#include "gwhp/evalkit.hpp"
#include "gwhp/geogen.hpp"
#include "gwhp/lahm.hpp"
#include "gwhp/nn/unet.hpp"
#include "gwhp/random.hpp"
#include "gwhp/surrogate.hpp"
#include "oracles.hpp"

using namespace gwhp;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Collects the checks of one criterion; the criterion passes if all do.
struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "!") + what);
  }
};

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("gwhp_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

bool same_files(const fs::path& a, const fs::path& b, int count) {
  for (int k = 0; k < count; ++k) {
    for (const char* ext : {".gwhp", ".json"}) {
      const auto name = sample_stem(k) + ext;
      if (read_file_bytes(a / name) != read_file_bytes(b / name)) return false;
    }
  }
  return true;
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

// ---------------------------------------------------------------------------

Outcome solver_suite() {
  Outcome o;
  {
    const auto t0 = Clock::now();
    const double e32 = oracles::manufactured_error(32);
    const double e64 = oracles::manufactured_error(64);
    const double secs = seconds_since(t0);
    const double order = std::log2(e32 / e64);
    o.check(order >= 1.8 && secs < 10.0, fmt("MMS order %.3f (>= 1.8) in %.2f s (< 10 s)", order, secs));
  }
  {
    const SimParams sim;
    double worst = 0.0;
    double t_lo = 1e300;
    double t_hi = -1e300;
    int downstream = 0;
    for (int s = 0; s < 20; ++s) {
      const auto spec = scenario_for(2024, s);
      const auto flow = solve_flow(spec, sim);
      const double scale = flow.fluxes.max_abs();
      for (double r : mass_imbalance(flow.fluxes, spec.well, sim)) worst = std::max(worst, std::fabs(r) / scale);
      const auto sample = run_scenario(spec);
      t_lo = std::min(t_lo, sample.temperature.min());
      t_hi = std::max(t_hi, sample.temperature.max());
      if (oracles::downstream_alignment(sample) > 0.0) ++downstream;
    }
    o.check(worst <= 1e-10, fmt("mass residual %.2e relative (<= 1e-10) on 20 scenarios", worst));
    o.check(t_lo >= 10.0 && t_hi <= 15.0, fmt("T in [%.6f, %.6f] on the same 20 (within [10, 15])", t_lo, t_hi));
    o.check(downstream == 20, fmt("plume centroid downstream of the local flow in %d/20", downstream));
  }
  {
    const Grid g;
    const auto spec = oracles::uniform_scenario(g, 100.0, 0.0);
    const double ratio = oracles::transverse_flow_ratio(permeability_field(spec.geology, g), 100.0);
    o.check(ratio <= 1e-10, fmt("uniform K, x gradient: max|qy|/max|qx| = %.1e (<= 1e-10)", ratio));
    const auto sample = run_scenario(spec);
    const double dot = oracles::downstream_alignment(sample);
    o.check(dot > 0.0, fmt("uniform K, x gradient: centroid . q = %.3e (> 0)", dot));
  }
  {
    const auto r = oracles::radial_symmetry();
    o.check(r.asymmetry <= 0.05 && r.mirror_error <= 1e-9,
            fmt("zero gradient: front radii %.2f/%.2f/%.2f m, asymmetry %.2f%% (<= 5%%), mirror %.1e", r.radii[0],
                r.radii[1], r.radii[2], 100.0 * r.asymmetry, r.mirror_error));
  }
  return o;
}

Outcome interpolation_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  double exact = 0.0;
  for (int size : {4, 6, 8}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      GeologySpec spec;
      spec.seed = seed;
      spec.control_grid_size = size;
      const auto s = sample_control_points(spec);
      const ThinPlateSpline tps(s);
      for (std::size_t k = 0; k < s.values.size(); ++k) {
        exact = std::max(exact, rel(tps(s.positions[k].x, s.positions[k].y), s.values[k]));
      }
    }
  }
  o.check(exact <= 1e-9, fmt("exact at control points: %.1e (<= 1e-9)", exact));

  double affine = 0.0;
  {
    GeologySpec spec;
    spec.control_grid_size = 6;
    auto s = sample_control_points(spec);
    const auto f = [](double x, double y) { return 3e-8 + 1e-10 * x - 4e-11 * y; };
    for (std::size_t k = 0; k < s.values.size(); ++k) s.values[k] = f(s.positions[k].x, s.positions[k].y);
    const ThinPlateSpline tps(s);
    for (double x = 0.5; x < 128.0; x += 3.1) {
      for (double y = 0.5; y < 128.0; y += 2.9) affine = std::max(affine, rel(tps(x, y), f(x, y)));
    }
  }
  o.check(affine <= 1e-8, fmt("affine reproduction: %.1e (<= 1e-8)", affine));

  double dense = 0.0;
  for (std::uint64_t seed : {42u, 43u, 44u}) {
    GeologySpec spec;
    spec.seed = seed;
    spec.control_grid_size = 4;
    const Grid grid{16, 16, 8.0, 8.0};
    const auto s = sample_control_points(spec, grid);
    const oracles::DenseTps oracle(s);
    const auto field = tps_interpolate(s, grid, 0.0);
    for (int j = 0; j < 16; ++j) {
      for (int i = 0; i < 16; ++i) {
        const auto c = cell_center(grid, i, j);
        dense = std::max(dense, rel(field(i, j), std::max(oracle(c.x, c.y), 0.0)));
      }
    }
  }
  o.check(dense <= 1e-8, fmt("dense-oracle agreement on 16x16: %.1e (<= 1e-8)", dense));
  const double secs = seconds_since(t0);
  o.check(secs < 5.0, fmt("runtime %.2f s (< 5 s)", secs));
  return o;
}

Outcome model_correctness() {
  Outcome o;
  {
    nn::ModelConfig c;
    c.input_size = 8;
    c.channel_schedule = {3, 4};
    double worst = 0.0;
    for (bool skip : {true, false}) {
      c.skip_connections = skip;
      nn::UNet<double> net(c);
      net.initialize(5);
      auto p = net.params();
      for (auto& v : p) v += 0.01;
      Rng rng(14);
      std::vector<double> x(net.sample_input_size() * 2);
      for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
      std::vector<double> y(net.sample_output_size() * 2);
      std::vector<double> r(y.size());
      for (auto& v : r) v = 2.0 * rng.uniform() - 1.0;
      nn::Workspace<double> ws;
      auto loss = [&] {
        net.forward(x, 2, y, ws);
        double s = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) s += y[k] * r[k];
        return s;
      };
      loss();
      net.backward(r, ws);
      const std::vector<double> grad(net.grads().begin(), net.grads().end());
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double keep = p[k];
        p[k] = keep + 1e-6;
        const double up = loss();
        p[k] = keep - 1e-6;
        const double down = loss();
        p[k] = keep;
        const double fd = (up - down) / 2e-6;
        worst = std::max(worst, std::fabs(fd - grad[k]) / std::max({std::fabs(fd), std::fabs(grad[k]), 1e-4}));
      }
    }
    o.check(worst <= 1e-3, fmt("finite-difference gradient check: %.1e relative (<= 1e-3)", worst));
  }
  {
    const auto n = count_parameters(nn::ModelConfig{});
    const double off = std::fabs(static_cast<double>(n) - 480000.0) / 480000.0;
    o.check(off <= 0.10, fmt("default parameter count %zu, %.2f%% from 480000 (<= 10%%)", n, 100.0 * off));
  }
  {
    const auto sample = run_scenario(scenario_for(1, 0));
    const std::vector<Sample> one{sample};
    const auto stats = fit_norm_stats(std::span<const Sample>(one));
    DatasetSplit split;
    split.stats = stats;
    split.train.push_back(preprocess(sample, stats, "s"));
    TrainConfig tc;
    tc.epochs = 2000;
    tc.batch_size = 1;
    tc.learning_rate = 1e-3;
    int first_below = -1;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochRecord& r) {
      // r.train_loss is accumulated during the step that ends epoch r.epoch
      if (first_below < 0 && r.epoch > 0 && r.train_loss < 1e-4) first_below = r.epoch;
    };
    const auto result = train(build_model(nn::ModelConfig{}, 1), split, tc, hooks);
    const double mse = evaluate_loss(result.model, split.train);
    o.check(mse < 1e-4 && first_below > 0,
            fmt("single-pair overfit: MSE %.2e after 2000 steps (< 1e-4), first below at step %d", mse, first_below));
  }
  return o;
}

Outcome desk_scale() {
  Outcome o;
  constexpr int kScenarios = 240;
  constexpr std::uint64_t kSeed = 1;
  const auto dir = scratch("desk");
  const auto t0 = Clock::now();
  const auto gen = generate_dataset(dir, kScenarios, kSeed, 1);
  const double gen_secs = seconds_since(t0);
  o.check(gen.written == kScenarios && gen.failures.empty(),
          fmt("generated %d/%d scenarios in %.0f s", gen.written, kScenarios, gen_secs));
  const auto data = load_dataset(dir);
  double t_lo = 1e300;
  double t_hi = -1e300;
  for (const auto& s : data.samples) {
    t_lo = std::min(t_lo, s.temperature.min());
    t_hi = std::max(t_hi, s.temperature.max());
  }
  o.check(t_lo >= 10.0 && t_hi <= 15.0, fmt("all generated samples within [10, 15] C: [%.4f, %.4f]", t_lo, t_hi));

  SplitConfig sc;
  sc.seed = kSeed;
  sc.test_count = 40;
  sc.val_fraction = 0.2;
  sc.augment_per_sample = 3;
  const auto split = build_splits(data.samples, data.ids, sc);
  int rotated = 0;
  for (const auto& p : split.train) rotated += p.rotation != 0 ? 1 : 0;
  o.check(rotated > 0, fmt("quarter-turn augmentation: %zu train pairs (%d rotated), %zu validation, %zu test",
                           split.train.size(), rotated, split.validation.size(), split.test.size()));

  nn::ModelConfig mc;
  mc.channel_schedule = {8, 16, 32, 32};
  TrainConfig tc;
  tc.epochs = 2000;
  tc.batch_size = 64;
  tc.learning_rate = 1e-3;
  TrainHooks hooks;
  const auto t1 = Clock::now();
  hooks.on_epoch = [&](const EpochRecord& r) {
    if (r.epoch % 100 == 0) {
      std::fprintf(stderr, "  epoch %4d  train %.3e  validation %.3e  %.0f s\n", r.epoch, r.train_loss,
                   r.validation_loss, seconds_since(t1));
    }
  };
  const auto result = train(build_model(mc, 0), split, tc, hooks);
  const double train_secs = seconds_since(t1);
  o.check(result.history.epochs.size() == 2001u,
          fmt("trained %d epochs (model %zu parameters) in %.0f s, best epoch %d", tc.epochs,
              result.model.parameter_count(), train_secs, result.history.best_epoch));
  const double v0 = result.history.epochs.front().validation_loss;
  const double vbest = result.history.best_validation_loss;
  o.check(vbest < 0.5 * v0, fmt("best validation loss %.3e < half the initial %.3e", vbest, v0));

  const auto report = evaluate_test_set(result.model, split.test, split.stats);
  o.check(report.samples.size() >= 20u && report.aggregate_relative_error <= 0.05,
          fmt("aggregate test relative error %.2f%% (<= 5%%) on %zu held-out scenarios", 100.0 * report.aggregate_relative_error,
              report.samples.size()));
  fs::remove_all(dir);
  return o;
}

Outcome latency() {
  Outcome o;
  auto model = build_model(nn::ModelConfig{}, 3);
  model.set_norm_stats(NormStats{{0.0, 2e-6}, {0.0, 2e-6}, {2.5, 2.5}});
  const auto flow = solve_flow(scenario_for(7, 0), SimParams{});
  std::vector<double> ms;
  for (int k = 0; k < 33; ++k) {
    const auto t0 = Clock::now();
    const auto t = infer(model, flow.velocity);
    const double dt = 1000.0 * seconds_since(t0);
    if (k >= 3) ms.push_back(dt);  // first calls warm caches and allocators
  }
  const auto s = latency_stats(ms);
  o.check(s.p90 < 200.0, fmt("default model, 64x64: p50 %.1f ms, p90 %.1f ms (< 200 ms), max %.1f ms over %zu runs",
                             s.p50, s.p90, s.max, s.count));
  return o;
}

Outcome lahm_properties() {
  Outcome o;
  LahmParams p;
  LahmParams long_run;
  long_run.time = 1e9;
  bool symmetric = true;
  for (double x : {0.5, 3.0, 17.0, 60.0}) {
    for (double y : {0.1, 1.0, 2.5, 8.0}) symmetric = symmetric && lahm_delta_t(p, x, y) == lahm_delta_t(p, x, -y);
  }
  o.check(symmetric, "transverse symmetry exact");
  bool upstream = true;
  for (double x : {0.0, -0.1, -5.0, -100.0}) {
    for (double y : {0.0, 1.0, -3.0}) upstream = upstream && lahm_delta_t(p, x, y) == 0.0;
  }
  o.check(upstream, "zero upstream");
  bool monotone = true;
  double prev = lahm_delta_t(long_run, 2.0, 0.0);
  for (double x = 2.5; x < 128.0; x += 0.5) {
    const double v = lahm_delta_t(long_run, x, 0.0);
    monotone = monotone && v < prev;
    prev = v;
  }
  o.check(monotone, "centerline strictly decreasing for x >= 2 m (beyond one cell)");
  double worst = 0.0;
  for (const auto& q : {p, long_run}) {
    for (double x : {1.0, 2.0, 7.5, 20.0, 45.0, 90.0}) {
      for (double y : {0.0, 0.5, 2.0, 5.0}) {
        const double want = oracles::lahm_quadrature(q, x, y);
        if (want < 1e-12) continue;
        worst = std::max(worst, rel(lahm_delta_t(q, x, y), want));
      }
    }
  }
  o.check(worst <= 1e-6, fmt("quadrature oracle agreement %.1e (<= 1e-6)", worst));
  return o;
}

Outcome metric_goldens() {
  Outcome o;
  const Grid g{16, 16};
  Rng rng(5);
  std::vector<double> t(g.cell_count());
  for (auto& v : t) v = 5.0 * rng.uniform();
  const std::vector<double> zero(t.size(), 0.0);
  o.check(relative_error(t, t) == 0.0, "relative_error(equal) = 0");
  o.check(relative_error(zero, t) == 1.0, "relative_error(zero prediction) = 1");

  // Dataset round trips on a simulated sample.
  const auto sample = run_scenario(scenario_for(9, 1));
  const auto dir = scratch("roundtrip");
  save_sample(dir, "s", sample);
  const auto back = load_sample(dir / "s.gwhp");
  save_sample(dir, "t", back);
  o.check(read_file_bytes(dir / "s.gwhp") == read_file_bytes(dir / "t.gwhp") &&
              read_file_bytes(dir / "s.json") == read_file_bytes(dir / "t.json"),
          "sample save/load/save bit-exact");
  const auto c = to_container(sample);
  o.check(encode_container(decode_container(encode_container(c))) == encode_container(c), "container round trip bit-exact");
  const std::vector<Sample> one{sample};
  const auto stats = fit_norm_stats(std::span<const Sample>(one));
  const auto pair = preprocess(sample, stats, "s");
  const auto tt = denormalize_target(pair.target, stats);
  double norm = 0.0;
  for (std::size_t k = 0; k < tt.size(); ++k) norm = std::max(norm, std::fabs(tt[k] - sample.temperature[k]));
  o.check(norm <= 1e-10, fmt("normalize/denormalize round trip %.1e (<= 1e-10)", norm));
  auto r = pair;
  for (int k = 0; k < 4; ++k) r = augment_rotate(r, 1);
  o.check(r.input == pair.input && r.target == pair.target, "four quarter turns reproduce the pair bit-exactly");
  fs::remove_all(dir);
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  generate_dataset(a, 6, 77, 1);
  generate_dataset(b, 6, 77, 2);
  o.check(same_files(a, b, 6), "datagen: 6 scenarios, 1 vs 2 workers, bit-identical files");

  const auto data = load_dataset(a);
  SplitConfig sc;
  sc.test_count = 1;
  sc.augment_per_sample = 1;
  const auto s1 = build_splits(data.samples, data.ids, sc);
  const auto s2 = build_splits(data.samples, data.ids, sc);
  nn::ModelConfig mc;
  mc.channel_schedule = {4, 8, 8};
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  tc.seed = 3;
  const auto m1 = train(build_model(mc, 9), s1, tc).model;
  const auto m2 = train(build_model(mc, 9), s2, tc).model;
  o.check(encode_model(m1) == encode_model(m2),
          fmt("training: identical model files (fingerprint %s)", model_fingerprint(m1).c_str()));
  fs::remove_all(a);
  fs::remove_all(b);
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"solver-verification", solver_suite}, {"interpolation", interpolation_suite},
      {"model-correctness", model_correctness}, {"desk-scale-e2e", desk_scale},
      {"inference-latency", latency},       {"lahm-properties", lahm_properties},
      {"metric-goldens", metric_goldens},   {"determinism", determinism},
  };
  std::vector<std::string> selected(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.name) == selected.end()) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : out.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("%s %-20s %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.name, detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!out.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

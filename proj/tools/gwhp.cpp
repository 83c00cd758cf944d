// Command-line entry point: datagen, train, eval, predict, lahm, serve.
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gwhp/container.hpp"
#include "gwhp/dataset.hpp"
#include "gwhp/error.hpp"
#include "gwhp/evalkit.hpp"
#include "gwhp/lahm.hpp"
#include "gwhp/manifest.hpp"
#include "gwhp/render.hpp"
#include "gwhp/service.hpp"
#include "gwhp/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kSchemaVersion = 1;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw gwhp::ValidationError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw gwhp::ValidationError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw gwhp::Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw gwhp::ValidationError(std::string(what) + " '" + path.string() + "' does not exist");
  }
}

void check_schema(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw gwhp::ValidationError(std::string(what) + ": missing schema_version");
  }
  if (j.at("schema_version") != kSchemaVersion) {
    throw gwhp::ValidationError(std::string(what) + ": unsupported schema_version " +
                                j.at("schema_version").dump());
  }
}

gwhp::RunManifest start_manifest(const std::string& command, int argc, char** argv) {
  gwhp::RunManifest m;
  m.command = command;
  m.arguments.assign(argv, argv + argc);
  m.started_utc = gwhp::utc_timestamp();
  return m;
}

// ---- datagen ---------------------------------------------------------------

struct DatagenOptions {
  int count = 0;
  std::uint64_t seed = 0;
  fs::path out;
  int workers = 1;
  double gradient_max = gwhp::GradientRange{}.max_abs;
};

int run_datagen(const DatagenOptions& o, const gwhp::RunManifest& base) {
  gwhp::Stopwatch clock;
  gwhp::GeologyConfig geology;
  geology.gradient.max_abs = o.gradient_max;
  const auto report = gwhp::generate_dataset(o.out, o.count, o.seed, o.workers, geology);

  auto m = base;
  m.config = {{"count", o.count}, {"gradient_max_abs", o.gradient_max}, {"workers", o.workers}};
  m.seeds["dataset"] = o.seed;
  for (int i = 0; i < o.count; ++i) m.outputs.push_back(gwhp::sample_stem(i) + ".gwhp");
  m.timings_seconds["total"] = clock.seconds();
  gwhp::write_manifest(o.out / "manifest.json", m);

  for (const auto& f : report.failures) std::cerr << "scenario failed: " << f << '\n';
  std::cout << "wrote " << report.written << " of " << o.count << " samples to " << o.out.string()
            << " in " << clock.seconds() << " s\n";
  return report.failures.empty() ? 0 : kExitRuntime;
}

// ---- train -----------------------------------------------------------------

struct TrainFile {
  gwhp::ModelConfig model;
  std::uint64_t model_seed = 0;
  gwhp::TrainConfig train;
  gwhp::SplitConfig split;
};

TrainFile parse_train_config(const json& j) {
  check_schema(j, "train config");
  TrainFile t;
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") continue;
    if (key == "model") t.model = value.get<gwhp::ModelConfig>();
    else if (key == "model_seed") t.model_seed = value.get<std::uint64_t>();
    else if (key == "train") t.train = value.get<gwhp::TrainConfig>();
    else if (key == "split") t.split = value.get<gwhp::SplitConfig>();
    else throw gwhp::ValidationError("train config: unknown key '" + key + "'");
  }
  return t;
}

json to_json(const TrainFile& t) {
  return {{"schema_version", kSchemaVersion},
          {"model", t.model},
          {"model_seed", t.model_seed},
          {"train", t.train},
          {"split", t.split}};
}

int run_train(const fs::path& data, const std::optional<fs::path>& config, const fs::path& out,
              bool quiet, const gwhp::RunManifest& base) {
  gwhp::Stopwatch clock;
  TrainFile tf;
  if (config) {
    require_file(*config, "config");
    tf = parse_train_config(read_json_file(*config));
  }
  const auto dataset = gwhp::load_dataset(data);
  const double load_s = clock.seconds();
  const auto split = gwhp::build_splits(dataset.samples, dataset.ids, tf.split);
  fs::create_directories(out);

  auto model = gwhp::build_model(tf.model, tf.model_seed);
  gwhp::TrainHooks hooks;
  hooks.on_epoch = [&](const gwhp::EpochRecord& r) {
    if (quiet) return;
    if (r.epoch == 0 || r.epoch % 50 == 0 || r.epoch == tf.train.epochs) {
      std::printf("epoch %5d  train %.4e  val %.4e\n", r.epoch, r.train_loss, r.validation_loss);
      std::fflush(stdout);
    }
  };
  hooks.on_checkpoint = [&](int epoch, const gwhp::SurrogateModel& best) {
    gwhp::save_model(best, out / "checkpoint.gwnn");
    if (!quiet) std::printf("checkpoint at epoch %d\n", epoch);
  };
  auto result = gwhp::train(model, split, tf.train, hooks);
  const double train_s = clock.seconds() - load_s;

  result.model.metadata() = {{"train_config", to_json(tf)},
                             {"best_epoch", result.history.best_epoch},
                             {"best_validation_loss", result.history.best_validation_loss},
                             {"train_sources", split.train_sources.size()},
                             {"version", gwhp::version_string()}};
  gwhp::save_model(result.model, out / "model.gwnn");
  write_json_file(out / "history.json", result.history);
  write_json_file(out / "split.json", {{"train_sources", split.train_sources},
                                       {"validation_sources", split.validation_sources},
                                       {"test_sources", split.test_sources},
                                       {"norm_stats", split.stats}});

  auto m = base;
  m.config = to_json(tf);
  m.seeds = {{"model", tf.model_seed}, {"train", tf.train.seed}, {"split", tf.split.seed}};
  m.inputs.push_back(data.string());
  m.outputs = {"model.gwnn", "history.json", "split.json"};
  if (tf.train.checkpoint_every > 0) m.outputs.push_back("checkpoint.gwnn");
  m.timings_seconds = {{"load", load_s}, {"train", train_s}, {"total", clock.seconds()}};
  gwhp::write_manifest(out / "manifest.json", m);

  std::printf("best epoch %d, validation loss %.4e, %zu parameters, model at %s\n",
              result.history.best_epoch, result.history.best_validation_loss,
              result.model.parameter_count(), (out / "model.gwnn").c_str());
  return 0;
}

// ---- eval ------------------------------------------------------------------

int run_eval(const std::optional<fs::path>& model_path, const std::optional<fs::path>& predictions,
             const fs::path& data, const std::optional<fs::path>& split_path, const fs::path& out,
             bool render, const gwhp::RunManifest& base) {
  gwhp::Stopwatch clock;
  if (model_path.has_value() == predictions.has_value()) {
    throw gwhp::ValidationError("eval: give exactly one of --model or --predictions");
  }
  std::optional<std::set<std::string>> selected;
  if (split_path) {
    require_file(*split_path, "split");
    const auto ids = read_json_file(*split_path).at("test_sources").get<std::vector<std::string>>();
    selected.emplace(ids.begin(), ids.end());
  }

  std::optional<gwhp::SurrogateModel> model;
  if (model_path) {
    require_file(*model_path, "model");
    model = gwhp::load_model(*model_path);
  }
  if (predictions && !fs::is_directory(*predictions)) {
    throw gwhp::ValidationError("predictions directory '" + predictions->string() + "' does not exist");
  }

  std::vector<gwhp::EvalCase> cases;
  std::vector<double> latency;
  for (const auto& path : gwhp::list_samples(data)) {
    const std::string id = path.stem().string();
    if (selected && !selected->count(id)) continue;
    auto sample = gwhp::load_sample(path);
    gwhp::ScalarField predicted;
    if (model) {
      gwhp::Stopwatch t;
      predicted = gwhp::infer(*model, sample.velocity);
      latency.push_back(t.seconds() * 1000.0);
    } else {
      const auto file = *predictions / (id + ".gwhp");
      require_file(file, "prediction");
      const auto c = gwhp::read_container(file);
      if (c.nx != sample.spec.grid.nx || c.ny != sample.spec.grid.ny) {
        throw gwhp::ValidationError("prediction '" + file.string() + "' has the wrong grid");
      }
      predicted = gwhp::ScalarField(sample.spec.grid, c.channel_as_double("T"), "C");
    }
    cases.push_back({id, std::move(predicted), std::move(sample.temperature), std::move(sample.velocity)});
  }
  if (cases.empty()) throw gwhp::ValidationError("eval: no samples selected");

  fs::create_directories(out);
  gwhp::EvalOptions options;
  if (render) options.render_dir = out / "renders";
  auto report = gwhp::evaluate_cases(cases, options);
  report.latency = gwhp::latency_stats(latency);
  write_json_file(out / "report.json", report);

  auto m = base;
  m.config = {{"render", render}, {"selected", selected ? selected->size() : cases.size()}};
  m.inputs.push_back(data.string());
  if (model_path) m.inputs.push_back(model_path->string());
  if (predictions) m.inputs.push_back(predictions->string());
  if (split_path) m.inputs.push_back(split_path->string());
  m.outputs.push_back("report.json");
  if (render) m.outputs.push_back("renders/");
  m.timings_seconds["total"] = clock.seconds();
  gwhp::write_manifest(out / "manifest.json", m);

  std::cout << gwhp::format_report_table(report);
  return 0;
}

// ---- predict ---------------------------------------------------------------

gwhp::ScenarioSpec read_scenario(const fs::path& path) {
  require_file(path, "scenario");
  const json j = read_json_file(path);
  // a sample sidecar wraps the scenario
  if (j.is_object() && j.contains("format") && j.at("format") == "gwhp-sample") {
    return j.at("scenario").get<gwhp::ScenarioSpec>();
  }
  return j.get<gwhp::ScenarioSpec>();
}

fs::path sibling_manifest(const fs::path& out) {
  auto p = out;
  p += ".manifest.json";
  return p;
}

int run_predict(const std::optional<fs::path>& model_path, const fs::path& scenario_path,
                const fs::path& out, const std::string& mode, const gwhp::RunManifest& base) {
  gwhp::Stopwatch clock;
  const auto spec = read_scenario(scenario_path);
  std::optional<gwhp::SurrogateModel> model;
  if (mode == "surrogate") {
    if (!model_path) throw gwhp::ValidationError("predict: --model is required in surrogate mode");
    require_file(*model_path, "model");
    model = gwhp::load_model(*model_path);
  }
  const auto fields = gwhp::predict_fields(spec, mode, model ? &*model : nullptr);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  gwhp::write_container(out, fields);

  auto m = base;
  m.config = {{"mode", mode}, {"scenario", spec}};
  m.seeds["geology"] = spec.geology.seed;
  m.inputs.push_back(scenario_path.string());
  if (model_path) m.inputs.push_back(model_path->string());
  m.outputs.push_back(out.filename().string());
  m.timings_seconds["total"] = clock.seconds();
  gwhp::write_manifest(sibling_manifest(out), m);
  const auto t = fields.channel_as_double("T");
  std::printf("wrote %s (T max %.3f C)\n", out.c_str(), *std::max_element(t.begin(), t.end()));
  return 0;
}

// ---- lahm ------------------------------------------------------------------

struct LahmFile {
  gwhp::LahmParams params;
  gwhp::Grid grid;
  std::optional<gwhp::CellIndex> well_cell;
  double flow_angle = 0.0;
};

LahmFile parse_lahm_file(const json& j) {
  check_schema(j, "lahm params");
  LahmFile f;
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") continue;
    if (key == "params") f.params = value.get<gwhp::LahmParams>();
    else if (key == "grid") f.grid = value.get<gwhp::Grid>();
    else if (key == "flow_angle") f.flow_angle = value.get<double>();
    else if (key == "well_cell") f.well_cell = gwhp::CellIndex{value.at(0).get<int>(), value.at(1).get<int>()};
    else throw gwhp::ValidationError("lahm params: unknown key '" + key + "'");
  }
  f.grid.validate();
  f.params.validate();
  return f;
}

int run_lahm(const fs::path& params_path, const fs::path& out, const std::optional<fs::path>& png,
             const gwhp::RunManifest& base) {
  gwhp::Stopwatch clock;
  require_file(params_path, "params");
  const json j = read_json_file(params_path);
  const LahmFile f = parse_lahm_file(j);
  const auto well = f.well_cell.value_or(gwhp::center_cell_index(f.grid));
  const auto field = gwhp::lahm_field(f.params, f.grid, well, f.flow_angle, gwhp::kAmbientTemperature);

  gwhp::FieldContainer c;
  c.nx = f.grid.nx;
  c.ny = f.grid.ny;
  c.add("T", field.values());
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  gwhp::write_container(out, c);
  if (png) gwhp::write_png(*png, gwhp::render_field(field));

  auto m = base;
  m.config = j;
  m.inputs.push_back(params_path.string());
  m.outputs.push_back(out.filename().string());
  if (png) m.outputs.push_back(png->string());
  m.timings_seconds["total"] = clock.seconds();
  gwhp::write_manifest(sibling_manifest(out), m);
  std::printf("wrote %s (T max %.3f C)\n", out.c_str(), field.max());
  return 0;
}

// ---- serve -----------------------------------------------------------------

gwhp::Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

int run_serve(gwhp::ServiceConfig config) {
  if (config.model_path) require_file(*config.model_path, "model");
  gwhp::Service service(std::move(config));
  const int port = service.bind();
  std::printf("listening on http://%s:%d\n", service.config().host.c_str(), port);
  std::fflush(stdout);
  g_service = &service;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  service.listen();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Groundwater heat pump plume toolkit: simulation data, surrogate training and serving"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gwhp::version_string());

  DatagenOptions dg;
  auto* datagen = app.add_subcommand("datagen", "Simulate random scenarios into a sample directory");
  datagen->add_option("--count", dg.count, "Number of scenarios")->required()->check(CLI::PositiveNumber);
  datagen->add_option("--seed", dg.seed, "Dataset seed")->required();
  datagen->add_option("--out", dg.out, "Output directory")->required();
  datagen->add_option("--workers", dg.workers, "Parallel scenarios")->check(CLI::PositiveNumber);
  datagen->add_option("--gradient-max", dg.gradient_max, "Largest |pressure gradient| component, Pa/m")
      ->check(CLI::PositiveNumber);

  fs::path train_data;
  std::optional<fs::path> train_config;
  fs::path train_out;
  bool train_quiet = false;
  auto* train = app.add_subcommand("train", "Train a surrogate on a sample directory");
  train->add_option("--data", train_data, "Sample directory")->required();
  train->add_option("--config", train_config, "Training config JSON");
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_flag("--quiet", train_quiet, "Suppress per-epoch output");

  std::optional<fs::path> eval_model;
  std::optional<fs::path> eval_predictions;
  fs::path eval_data;
  std::optional<fs::path> eval_split;
  fs::path eval_out;
  bool eval_no_render = false;
  auto* eval = app.add_subcommand("eval", "Score a model or saved predictions against simulations");
  eval->add_option("--model", eval_model, "Model file");
  eval->add_option("--predictions", eval_predictions, "Directory of predicted containers named like the samples");
  eval->add_option("--data", eval_data, "Sample directory")->required();
  eval->add_option("--split", eval_split, "split.json from training; restricts to its test sources");
  eval->add_option("--out", eval_out, "Report directory")->required();
  eval->add_flag("--no-render", eval_no_render, "Skip PNG triptychs");

  std::optional<fs::path> predict_model;
  fs::path predict_scenario;
  fs::path predict_out;
  std::string predict_mode = "surrogate";
  auto* predict = app.add_subcommand("predict", "Predict the fields of one scenario");
  predict->add_option("--model", predict_model, "Model file (surrogate mode)");
  predict->add_option("--scenario", predict_scenario, "Scenario JSON or sample sidecar")->required();
  predict->add_option("--out", predict_out, "Output field container")->required();
  predict->add_option("--mode", predict_mode, "surrogate, simulate or lahm")
      ->check(CLI::IsMember({"surrogate", "simulate", "lahm"}));

  fs::path lahm_params;
  fs::path lahm_out;
  std::optional<fs::path> lahm_png;
  auto* lahm = app.add_subcommand("lahm", "Evaluate the analytical plume on a grid");
  lahm->add_option("--params", lahm_params, "LAHM parameter JSON")->required();
  lahm->add_option("--out", lahm_out, "Output field container")->required();
  lahm->add_option("--png", lahm_png, "Also render a PNG");

  gwhp::ServiceConfig sc;
  std::optional<fs::path> serve_model;
  auto* serve = app.add_subcommand("serve", "Run the HTTP prediction service");
  serve->add_option("--model", serve_model, "Model file")->envname("GWHP_MODEL");
  serve->add_option("--port", sc.port, "TCP port (0 picks a free one)")->envname("GWHP_PORT");
  serve->add_option("--host", sc.host, "Bind address")->envname("GWHP_HOST");
  serve->add_option("--max-simulations", sc.max_simulations, "Concurrent simulate requests")
      ->envname("GWHP_MAX_SIMULATIONS");
  serve->add_option("--cors-origin", sc.cors_origin, "Access-Control-Allow-Origin value")
      ->envname("GWHP_CORS_ORIGIN");
  serve->add_option("--payload", sc.payload, "base64 or array")
      ->envname("GWHP_PAYLOAD")
      ->check(CLI::IsMember({"base64", "array"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*datagen) return run_datagen(dg, start_manifest("datagen", argc, argv));
    if (*train) {
      return run_train(train_data, train_config, train_out, train_quiet,
                       start_manifest("train", argc, argv));
    }
    if (*eval) {
      return run_eval(eval_model, eval_predictions, eval_data, eval_split, eval_out, !eval_no_render,
                      start_manifest("eval", argc, argv));
    }
    if (*predict) {
      return run_predict(predict_model, predict_scenario, predict_out, predict_mode,
                         start_manifest("predict", argc, argv));
    }
    if (*lahm) return run_lahm(lahm_params, lahm_out, lahm_png, start_manifest("lahm", argc, argv));
    if (*serve) {
      sc.model_path = serve_model;
      return run_serve(sc);
    }
  } catch (const gwhp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

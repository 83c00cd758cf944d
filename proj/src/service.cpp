#include "gwhp/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gwhp/container.hpp"
#include "gwhp/error.hpp"
#include "gwhp/lahm.hpp"

namespace gwhp {

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
  HttpResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpResponse error_response(int status, const std::string& code, const std::string& message) {
  return json_response(status, {{"error", {{"code", code}, {"message", message}}}});
}

struct ScenarioRequest {
  ScenarioSpec spec;
  std::string mode;
  std::string payload;
};

ScenarioRequest parse_request(const nlohmann::json& j, const std::string& default_payload) {
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  nlohmann::json scenario = nlohmann::json::object();
  ScenarioRequest req;
  req.payload = default_payload;
  for (const auto& [key, value] : j.items()) {
    if (key == "geology" || key == "well" || key == "grid") {
      scenario[key] = value;
    } else if (key == "mode") {
      req.mode = value.get<std::string>();
    } else if (key == "payload") {
      req.payload = value.get<std::string>();
    } else {
      throw ValidationError("request: unknown key '" + key + "'");
    }
  }
  if (!j.contains("geology")) throw ValidationError("request: 'geology' is required");
  if (req.mode.empty()) throw ValidationError("request: 'mode' is required");
  if (req.mode != "surrogate" && req.mode != "simulate" && req.mode != "lahm") {
    throw ValidationError("request: mode must be one of surrogate, simulate, lahm");
  }
  if (req.payload != "base64" && req.payload != "array") {
    throw ValidationError("request: payload must be 'base64' or 'array'");
  }
  req.spec = scenario.get<ScenarioSpec>();
  req.spec.validate(kAmbientTemperature);
  return req;
}

std::string to_string(const std::vector<std::uint8_t>& bytes) {
  return {bytes.begin(), bytes.end()};
}

}  // namespace

FieldContainer predict_fields(const ScenarioSpec& spec, const std::string& mode,
                              const SurrogateModel* model) {
  const SimParams sim;
  ScalarField permeability;
  ScalarField pressure;
  VectorField velocity;
  ScalarField temperature;
  if (mode == "simulate") {
    Sample s = run_scenario(spec, TransportConfig{}, sim);
    permeability = std::move(s.permeability);
    pressure = std::move(s.pressure);
    velocity = std::move(s.velocity);
    temperature = std::move(s.temperature);
  } else if (mode == "surrogate" || mode == "lahm") {
    spec.validate(kAmbientTemperature);
    FlowSolution flow = solve_flow(spec, sim);
    if (mode == "surrogate") {
      if (model == nullptr) throw ValidationError("surrogate mode needs a model");
      temperature = infer(*model, flow.velocity);
    } else {
      const auto setup = lahm_from_flow(flow.velocity, spec.well, sim);
      temperature = lahm_field(setup.params, spec.grid, spec.well.cell, setup.flow_angle,
                               kAmbientTemperature);
    }
    permeability = std::move(flow.permeability);
    pressure = std::move(flow.pressure);
    velocity = std::move(flow.velocity);
  } else {
    throw ValidationError("mode must be one of surrogate, simulate, lahm");
  }
  FieldContainer fields;
  fields.nx = spec.grid.nx;
  fields.ny = spec.grid.ny;
  fields.add("K", permeability.values());
  fields.add("P", pressure.values());
  fields.add("qx", velocity.x());
  fields.add("qy", velocity.y());
  fields.add("T", temperature.values());
  return fields;
}

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ValidationError("service: port must be in 0..65535");
  if (max_simulations < 0) throw ValidationError("service: max_simulations must be >= 0");
  if (payload != "base64" && payload != "array") {
    throw ValidationError("service: payload must be 'base64' or 'array'");
  }
}

Service::Service(ServiceConfig config) : config_(std::move(config)) { config_.validate(); }

Service::~Service() { stop(); }

void Service::set_model(SurrogateModel model) {
  auto fp = model_fingerprint(model);
  auto loaded = std::make_shared<const Loaded>(Loaded{std::move(model), std::move(fp)});
  std::lock_guard lock(model_mutex_);
  loaded_ = std::move(loaded);
}

void Service::load_model(const std::filesystem::path& path) { set_model(gwhp::load_model(path)); }

std::shared_ptr<const Service::Loaded> Service::current() const {
  std::lock_guard lock(model_mutex_);
  return loaded_;
}

bool Service::ready() const { return current() != nullptr; }

HttpResponse Service::health() const {
  return json_response(200, {{"status", "ok"}, {"ready", ready()}});
}

HttpResponse Service::model_info() const {
  const auto loaded = current();
  if (!loaded) return error_response(503, "model_not_loaded", "no model is loaded");
  const auto& m = loaded->model;
  const auto& s = m.norm_stats();
  nlohmann::json stats;
  for (const auto& [name, c] : {std::pair{"qx", s.qx}, {"qy", s.qy}, {"t", s.t}}) {
    stats[name] = {{"center", c.center}, {"scale", c.scale}};
  }
  return json_response(200, {{"format_version", kModelFormatVersion},
                             {"service_version", GWHP_VERSION},
                             {"parameter_count", m.parameter_count()},
                             {"config", m.config()},
                             {"norm_stats", stats},
                             {"fingerprint", loaded->fingerprint},
                             {"metadata", m.metadata()}});
}

HttpResponse Service::predict(const std::string& body) const {
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(400, "invalid_json", e.what());
  }
  ScenarioRequest req;
  try {
    req = parse_request(j, config_.payload);
  } catch (const ValidationError& e) {
    return error_response(400, "invalid_request", e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "invalid_request", e.what());
  }

  std::shared_ptr<const Loaded> loaded;
  if (req.mode == "surrogate") {
    loaded = current();
    if (!loaded) return error_response(503, "model_not_loaded", "no model is loaded");
  }

  struct SlotGuard {
    std::atomic<int>* counter = nullptr;
    ~SlotGuard() {
      if (counter != nullptr) counter->fetch_sub(1);
    }
  } slot;
  if (req.mode == "simulate") {
    if (active_simulations_.fetch_add(1) >= config_.max_simulations) {
      active_simulations_.fetch_sub(1);
      return error_response(429, "too_many_simulations",
                            "at most " + std::to_string(config_.max_simulations) +
                                " simulations may run at once");
    }
    slot.counter = &active_simulations_;
  }

  FieldContainer fields;
  try {
    fields = predict_fields(req.spec, req.mode, loaded ? &loaded->model : nullptr);
  } catch (const ValidationError& e) {
    return error_response(400, "invalid_request", e.what());
  } catch (const SolverError& e) {
    return error_response(500, "solver_failure", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }

  nlohmann::json out{{"grid", req.spec.grid},
                     {"mode", req.mode},
                     {"channels", fields.names},
                     {"encoding", req.payload},
                     {"provenance",
                      {{"mode", req.mode},
                       {"service_version", GWHP_VERSION},
                       {"model_version", loaded ? nlohmann::json(loaded->fingerprint) : nlohmann::json()}}}};
  if (req.payload == "base64") {
    out["container"] = httplib::detail::base64_encode(to_string(encode_container(fields)));
  } else {
    nlohmann::json arrays = nlohmann::json::object();
    for (std::size_t c = 0; c < fields.names.size(); ++c) arrays[fields.names[c]] = fields.channels[c];
    out["fields"] = std::move(arrays);
  }
  const auto t = fields.channel_as_double("T");
  out["summary"] = {{"t_min", *std::min_element(t.begin(), t.end())},
                    {"t_max", *std::max_element(t.begin(), t.end())}};

  HttpResponse r = json_response(200, out);
  // timing goes in a header so identical requests produce identical bodies
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  r.headers["X-GWHP-Timing-Ms"] = buf;
  return r;
}

int Service::bind() {
  server_ = std::make_unique<httplib::Server>();
  auto& srv = *server_;
  auto reply = [this](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    if (!config_.cors_origin.empty()) res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
    res.set_content(r.body, r.content_type);
  };
  srv.Post("/v1/predict", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, predict(req.body));
  });
  srv.Get("/v1/model", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, model_info());
  });
  srv.Get("/v1/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, health());
  });
  srv.Options(R"(/v1/.*)", [this](const httplib::Request&, httplib::Response& res) {
    if (!config_.cors_origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Expose-Headers", "X-GWHP-Timing-Ms");
    }
    res.status = 204;
  });
  const int port = config_.port == 0 ? srv.bind_to_any_port(config_.host)
                                     : (srv.bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port < 0) {
    throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return port;
}

void Service::listen() {
  if (!server_) bind();
  std::thread loader;
  if (config_.model_path && !ready()) {
    loader = std::thread([this] {
      try {
        load_model(*config_.model_path);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "model load failed: %s\n", e.what());
      }
    });
  }
  server_->listen_after_bind();
  if (loader.joinable()) loader.join();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace gwhp

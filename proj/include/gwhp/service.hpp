#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "gwhp/container.hpp"
#include "gwhp/surrogate.hpp"

namespace httplib {
class Server;
}

namespace gwhp {

/// K, P, qx, qy and T for a scenario. mode "surrogate" runs the flow solve
/// and the model (which must be non-null), "simulate" the full transient
/// simulation, "lahm" the flow solve and the analytical plume.
FieldContainer predict_fields(const ScenarioSpec& spec, const std::string& mode,
                              const SurrogateModel* model);

struct ServiceConfig {
  std::optional<std::filesystem::path> model_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_simulations = 2;
  std::string cors_origin;
  /// "base64": the field container, base64 encoded; "array": plain JSON number arrays.
  std::string payload = "base64";

  void validate() const;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

/// Request handling is independent of the HTTP layer so it can be tested
/// directly; `serve` wires it to cpp-httplib.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  [[nodiscard]] const ServiceConfig& config() const { return config_; }

  void set_model(SurrogateModel model);
  void load_model(const std::filesystem::path& path);
  [[nodiscard]] bool ready() const;

  HttpResponse predict(const std::string& body) const;
  HttpResponse model_info() const;
  HttpResponse health() const;

  /// Binds host:port (port 0 picks a free one); returns the bound port.
  int bind();
  /// Blocks serving requests until stop(). Loads config().model_path first
  /// if set, while already answering health checks.
  void listen();
  void stop();

 private:
  struct Loaded {
    SurrogateModel model;
    std::string fingerprint;
  };
  [[nodiscard]] std::shared_ptr<const Loaded> current() const;

  ServiceConfig config_;
  mutable std::mutex model_mutex_;
  std::shared_ptr<const Loaded> loaded_;
  mutable std::atomic<int> active_simulations_{0};
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace gwhp

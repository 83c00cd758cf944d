#include <chrono>
#include <cmath>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gwhp/container.hpp"
#include "gwhp/darcy.hpp"
#include "gwhp/dataset.hpp"
#include "gwhp/error.hpp"
#include "gwhp/geogen.hpp"
#include "gwhp/service.hpp"
#include "gwhp/surrogate.hpp"

using namespace gwhp;
using nlohmann::json;

namespace {

// RFC 4648 decoder, written out here so the check does not reuse the
// encoder's library.
std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) throw std::runtime_error("bad base64");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

SurrogateModel test_model() {
  auto m = build_model(ModelConfig{}, 11);
  m.set_norm_stats(NormStats{{0.0, 2e-6}, {0.0, 2e-6}, {2.5, 2.5}});
  return m;
}

json request(const std::string& mode, std::uint64_t seed = 3) {
  return {{"geology", draw_geology(seed, {})}, {"mode", mode}};
}

json body_of(const HttpResponse& r) { return json::parse(r.body); }

}  // namespace

TEST(Base64Oracle, Rfc4648Vectors) {
  const auto s = [](const std::string& t) {
    const auto b = base64_decode(t);
    return std::string(b.begin(), b.end());
  };
  EXPECT_EQ(s(""), "");
  EXPECT_EQ(s("Zg=="), "f");
  EXPECT_EQ(s("Zm8="), "fo");
  EXPECT_EQ(s("Zm9v"), "foo");
  EXPECT_EQ(s("Zm9vYmFy"), "foobar");
}

TEST(Service, HealthReflectsModelLoading) {
  Service svc(ServiceConfig{});
  for (int k = 0; k < 3; ++k) {
    const auto r = svc.health();
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(body_of(r)["ready"], false);
  }
  EXPECT_EQ(svc.model_info().status, 503);
  EXPECT_EQ(body_of(svc.model_info())["error"]["code"], "model_not_loaded");
  svc.set_model(test_model());
  EXPECT_EQ(body_of(svc.health())["ready"], true);
}

TEST(Service, ModelInfoReportsParameterCountAndStableFingerprint) {
  Service a(ServiceConfig{});
  Service b(ServiceConfig{});
  const auto m = test_model();
  a.set_model(m);
  b.set_model(decode_model(encode_model(m)));
  const auto ia = body_of(a.model_info());
  EXPECT_EQ(ia["parameter_count"], m.parameter_count());
  EXPECT_EQ(ia["parameter_count"], 487313);
  EXPECT_EQ(ia["fingerprint"], model_fingerprint(m));
  EXPECT_EQ(ia["fingerprint"], body_of(b.model_info())["fingerprint"]);
  EXPECT_EQ(ia["norm_stats"]["t"]["scale"], 2.5);
}

TEST(Service, MalformedAndInvalidRequestsGive400) {
  Service svc(ServiceConfig{});
  svc.set_model(test_model());
  const auto bad_json = svc.predict("{not json");
  EXPECT_EQ(bad_json.status, 400);
  EXPECT_EQ(body_of(bad_json)["error"]["code"], "invalid_json");

  for (const json& j : {json::array(), json{{"mode", "lahm"}}, json{{"geology", draw_geology(1, {})}},
                        json{{"geology", draw_geology(1, {})}, {"mode", "magic"}},
                        json{{"geology", draw_geology(1, {})}, {"mode", "lahm"}, {"colour", 1}},
                        json{{"geology", {{"seed", 1}, {"control_grid_size", 5}}}, {"mode", "lahm"}}}) {
    const auto r = svc.predict(j.dump());
    EXPECT_EQ(r.status, 400) << j.dump();
    EXPECT_EQ(body_of(r)["error"]["code"], "invalid_request") << j.dump();
  }
  auto off_grid = request("lahm");
  off_grid["well"] = {{"cell", {{"i", 64}, {"j", 3}}}};
  EXPECT_EQ(svc.predict(off_grid.dump()).status, 400);
}

TEST(Service, SurrogateNeedsAModelOtherModesDoNot) {
  Service svc(ServiceConfig{});
  const auto r = svc.predict(request("surrogate").dump());
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(body_of(r)["error"]["code"], "model_not_loaded");
  EXPECT_EQ(svc.predict(request("lahm").dump()).status, 200);
}

TEST(Service, IdenticalRequestsGiveIdenticalBodies) {
  Service svc(ServiceConfig{});
  svc.set_model(test_model());
  for (const char* mode : {"surrogate", "lahm"}) {
    const auto body = request(mode).dump();
    const auto a = svc.predict(body);
    const auto b = svc.predict(body);
    ASSERT_EQ(a.status, 200);
    EXPECT_EQ(a.body, b.body);
    EXPECT_TRUE(a.headers.contains("X-GWHP-Timing-Ms"));
    // concurrent requests on the shared model agree as well
    auto f1 = std::async(std::launch::async, [&] { return svc.predict(body).body; });
    auto f2 = std::async(std::launch::async, [&] { return svc.predict(body).body; });
    EXPECT_EQ(f1.get(), a.body);
    EXPECT_EQ(f2.get(), a.body);
  }
}

TEST(Service, Base64PayloadDecodesToTheDirectComputation) {
  Service svc(ServiceConfig{});
  const auto model = test_model();
  svc.set_model(model);
  const auto r = svc.predict(request("surrogate", 5).dump());
  ASSERT_EQ(r.status, 200);
  const auto j = body_of(r);
  EXPECT_EQ(j["encoding"], "base64");
  EXPECT_EQ(j["channels"], (std::vector<std::string>{"K", "P", "qx", "qy", "T"}));
  EXPECT_EQ(j["provenance"]["model_version"], model_fingerprint(model));
  EXPECT_EQ(j["provenance"]["mode"], "surrogate");
  const auto got = decode_container(base64_decode(j["container"].get<std::string>()));
  ScenarioSpec spec;
  spec.geology = draw_geology(5, {});
  spec.well.cell = center_cell_index(spec.grid);
  const auto want = predict_fields(spec, "surrogate", &model);
  EXPECT_EQ(encode_container(got), encode_container(want));
  const auto t = want.channel_as_double("T");
  EXPECT_EQ(j["summary"]["t_max"], *std::max_element(t.begin(), t.end()));
}

TEST(Service, ArrayPayloadCarriesEveryChannel) {
  ServiceConfig cfg;
  cfg.payload = "array";
  Service svc(cfg);
  const auto j = body_of(svc.predict(request("lahm").dump()));
  ASSERT_TRUE(j.contains("fields"));
  for (const char* c : {"K", "P", "qx", "qy", "T"}) EXPECT_EQ(j["fields"][c].size(), 64u * 64u) << c;
  EXPECT_TRUE(j["provenance"]["model_version"].is_null());
  auto per_request = request("lahm");
  per_request["payload"] = "base64";
  EXPECT_TRUE(body_of(svc.predict(per_request.dump())).contains("container"));
}

TEST(Service, SimulationsBeyondTheLimitGet429) {
  ServiceConfig cfg;
  cfg.max_simulations = 0;
  Service none(cfg);
  const auto r = none.predict(request("simulate").dump());
  EXPECT_EQ(r.status, 429);
  EXPECT_EQ(body_of(r)["error"]["code"], "too_many_simulations");
  EXPECT_EQ(none.predict(request("lahm").dump()).status, 200);  // cheap modes unaffected

  cfg.max_simulations = 1;
  Service one(cfg);
  // A 128 x 128 run takes seconds, long enough for the second request to
  // arrive while the first still holds the only slot.
  auto big = request("simulate");
  big["grid"] = {{"nx", 128}, {"ny", 128}};
  const auto body = big.dump();
  const auto t0 = std::chrono::steady_clock::now();
  auto first = std::async(std::launch::async, [&] { return one.predict(body); });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  const auto second = one.predict(request("simulate").dump());
  EXPECT_EQ(second.status, 429);
  const auto done = first.get();
  EXPECT_EQ(done.status, 200);
  RecordProperty("first_ms", std::to_string(std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0).count()));
  const auto t = decode_container(base64_decode(body_of(done)["container"].get<std::string>())).channel_as_double("T");
  EXPECT_GE(*std::min_element(t.begin(), t.end()), 10.0 - 1e-6);
  EXPECT_LE(*std::max_element(t.begin(), t.end()), 15.0 + 1e-6);
  EXPECT_EQ(one.predict(request("simulate", 4).dump()).status, 200);  // the slot is released
}

TEST(Service, RejectsBadConfig) {
  ServiceConfig cfg;
  cfg.payload = "multipart";
  EXPECT_THROW(Service s(cfg), ValidationError);
  cfg = ServiceConfig{};
  cfg.port = 70000;
  EXPECT_THROW(Service s(cfg), ValidationError);
}

TEST(Service, ServesOverHttp) {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.cors_origin = "http://localhost:5173";
  Service svc(cfg);
  const int port = svc.bind();
  ASSERT_GT(port, 0);
  std::thread server([&] { svc.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(30, 0);
  auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["ready"], false);
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), cfg.cors_origin);

  auto info = client.Get("/v1/model");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 503);

  svc.set_model(test_model());
  EXPECT_EQ(json::parse(client.Get("/v1/health")->body)["ready"], true);

  const auto body = request("surrogate").dump();
  auto res = client.Post("/v1/predict", body, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, svc.predict(body).body);
  EXPECT_FALSE(res->get_header_value("X-GWHP-Timing-Ms").empty());

  auto bad = client.Post("/v1/predict", "]", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto pre = client.Options("/v1/predict");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  svc.stop();
  server.join();
}

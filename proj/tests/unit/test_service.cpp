#include <doctest.h>

#include <httplib.h>

#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "cmib/data/synthetic.hpp"
#include "cmib/service/service.hpp"
#include "generators.hpp"

using namespace cmib;
using namespace cmib::service;
using nlohmann::json;

namespace {

model::Checkpoint toy_checkpoint() {
  data::SyntheticConfig sc;
  const model::CmibModel<float> m(testgen::toy_config(), 21);
  return model::make_checkpoint(m, {}, data::synthetic_labels(sc), data::synthetic_skeleton(4),
                                std::nullopt);
}

data::MotionWindow sample_window() {
  data::SyntheticConfig sc;
  sc.n_windows = 1;
  sc.seed = 8;
  return data::gen_synthetic(sc)[0];
}

json pose_json(const geom::Pose& p) {
  json pos = json::array(), rot = json::array();
  for (const auto& v : p.positions) pos.push_back({v.x, v.y, v.z});
  for (const auto& q : p.rotations) rot.push_back({q.w, q.x, q.y, q.z});
  return {{"positions", pos}, {"rotations", rot}};
}

json valid_request() {
  const auto w = sample_window();
  return {{"T", 32},
          {"label", "walk"},
          {"start", pose_json(w.pose_at(1))},
          {"target", pose_json(w.pose_at(32))},
          {"anchor", {{"frame", 16}, {"pose", pose_json(w.pose_at(16))}}}};
}

json error_of(const Response& r) { return json::parse(r.body).at("error"); }

}  // namespace

TEST_CASE("requests before a model is loaded") {
  InferenceService svc;
  CHECK(!svc.loaded());
  CHECK(svc.handle_infill(valid_request().dump()).status == 503);
  CHECK(error_of(svc.handle_metadata()).at("code") == "model_not_loaded");
  const auto h = json::parse(svc.handle_health().body);
  CHECK(h.at("status") == "ok");
  CHECK(h.at("model_loaded") == false);
}

TEST_CASE("request validation") {
  InferenceService svc;
  svc.load(toy_checkpoint());
  auto send = [&](const json& j) { return svc.handle_infill(j.dump()); };

  CHECK(svc.handle_infill("{not json").status == 400);
  CHECK(error_of(svc.handle_infill("{not json")).at("code") == "invalid_json");
  CHECK(svc.handle_infill("[1,2]").status == 400);

  for (const char* key : {"T", "label", "start", "target"}) {
    auto j = valid_request();
    j.erase(key);
    const auto r = send(j);
    CAPTURE(key);
    CHECK(r.status == 400);
    CHECK(error_of(r).at("field") == key);
  }

  auto j = valid_request();
  j["T"] = 33;
  auto r = send(j);
  CHECK(r.status == 400);
  CHECK(error_of(r).at("message").get<std::string>().find("T_max = 32") != std::string::npos);

  j = valid_request();
  j["T"] = 2.5;
  CHECK(send(j).status == 400);

  j = valid_request();
  j["label"] = "swim";
  r = send(j);
  CHECK(r.status == 422);
  CHECK(error_of(r).at("code") == "unknown_label");
  j["label"] = 7;
  CHECK(send(j).status == 422);
  j["label"] = 1;
  CHECK(send(j).status == 200);

  j = valid_request();
  j["start"]["rotations"][2] = {2.0, 0.0, 0.0, 0.0};
  r = send(j);
  CHECK(r.status == 400);
  CHECK(error_of(r).at("field") == "start.rotations[2]");

  j = valid_request();
  j["target"]["positions"].erase(0);
  CHECK(error_of(send(j)).at("field") == "target.positions");

  j = valid_request();
  j["start"]["positions"][0][1] = "x";
  CHECK(send(j).status == 400);

  for (int k : {1, 32, 40}) {
    j = valid_request();
    j["anchor"]["frame"] = k;
    r = send(j);
    CHECK(r.status == 400);
    CHECK(error_of(r).at("field") == "anchor.frame");
  }
  j = valid_request();
  j["anchor"] = nullptr;
  CHECK(send(j).status == 200);
}

TEST_CASE("infill responses") {
  InferenceService svc;
  svc.load(toy_checkpoint());
  const auto body = valid_request().dump();
  const auto first = svc.handle_infill(body);
  REQUIRE(first.status == 200);
  const auto out = json::parse(first.body);
  REQUIRE(out.at("frames").size() == 32);
  CHECK(out.at("request").at("label_name") == "walk");
  CHECK(out.at("request").at("anchor").at("frame") == 16);
  CHECK(out.at("generation_ms").get<double>() >= 0.0);

  for (int i = 0; i < 5; ++i) {
    const auto again = json::parse(svc.handle_infill(body).body);
    CHECK(again.at("frames").dump() == out.at("frames").dump());
    CHECK(again.at("model_version") == out.at("model_version"));
  }

  const auto sk = data::synthetic_skeleton(4);
  for (const auto& f : out.at("frames")) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto q = f.at("rotations")[j].get<std::vector<double>>();
      CHECK(std::abs(std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]) - 1.0) < 1e-6);
      const int p = sk.parents()[j];
      if (p < 0) continue;
      const auto a = f.at("positions")[j].get<std::vector<double>>();
      const auto b = f.at("positions")[static_cast<std::size_t>(p)].get<std::vector<double>>();
      CHECK(std::abs(std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]) - sk.ref_lengths()[j]) <
            1e-6);
    }
  }
}

TEST_CASE("metadata and pose library") {
  InferenceService svc;
  const auto ck = toy_checkpoint();
  svc.load(ck);
  const auto m = json::parse(svc.handle_metadata().body);
  CHECK(m.at("labels") == json{"walk", "run", "jump"});
  CHECK(m.at("T_max") == 32);
  CHECK(m.at("joints") == 4);
  CHECK(m.at("quaternion_order") == "wxyz");
  CHECK(m.at("skeleton").at("parents").size() == 4);
  CHECK(m.at("model_version") == model::model_version(ck));

  CHECK(json::parse(svc.handle_poses().body).at("poses").empty());
  svc.set_pose_library({{"walk_1", sample_window().pose_at(1)}});
  const auto poses = json::parse(svc.handle_poses().body).at("poses");
  REQUIRE(poses.size() == 1);
  CHECK(poses[0].at("name") == "walk_1");
  CHECK(poses[0].at("pose").at("rotations").size() == 4);
}

TEST_CASE("HTTP routes") {
  InferenceService svc;
  svc.load(toy_checkpoint());
  ServerOptions opts;
  opts.port = 0;
  HttpServer server(svc, opts);
  const int port = server.bind();
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  auto health = cli.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto meta = cli.Get("/v1/metadata");
  REQUIRE(meta);
  CHECK(json::parse(meta->body).at("T_max") == 32);

  auto infill = cli.Post("/v1/infill", valid_request().dump(), "application/json");
  REQUIRE(infill);
  CHECK(infill->status == 200);
  CHECK(json::parse(infill->body).at("frames").size() == 32);

  auto bad = cli.Post("/v1/infill", "{", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  auto pre = cli.Options("/v1/infill");
  REQUIRE(pre);
  CHECK(pre->status == 204);

  CHECK(cli.Get("/v1/poses")->status == 200);
  CHECK(cli.Get("/nope")->status == 404);

  server.stop();
  th.join();
}

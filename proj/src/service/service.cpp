#include "cmib/service/service.hpp"

#include <chrono>
#include <cmath>
#include <optional>

#include <nlohmann/json.hpp>

namespace cmib::service {
namespace {

using nlohmann::json;

struct RequestError {
  int status;
  std::string code;
  std::string message;
  std::string field;
};

Response error_response(const RequestError& e) {
  json err = {{"code", e.code}, {"message", e.message}};
  if (!e.field.empty()) err["field"] = e.field;
  return {e.status, json{{"error", err}}.dump()};
}

[[noreturn]] void bad(const std::string& field, const std::string& message) {
  throw RequestError{400, "invalid_field", message, field};
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) bad(field, field + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(field, field + " must be finite");
  return v;
}

geom::Pose parse_pose(const json& j, const std::string& field, std::size_t joints) {
  if (!j.is_object()) bad(field, field + " must be an object with positions and rotations");
  const auto pos = j.find("positions");
  const auto rot = j.find("rotations");
  if (pos == j.end() || !pos->is_array()) bad(field + ".positions", "missing positions array");
  if (rot == j.end() || !rot->is_array()) bad(field + ".rotations", "missing rotations array");
  if (pos->size() != joints) {
    bad(field + ".positions", "expected " + std::to_string(joints) + " joints, got " +
                                  std::to_string(pos->size()));
  }
  if (rot->size() != joints) {
    bad(field + ".rotations", "expected " + std::to_string(joints) + " joints, got " +
                                  std::to_string(rot->size()));
  }
  geom::Pose pose(joints);
  for (std::size_t i = 0; i < joints; ++i) {
    const std::string pf = field + ".positions[" + std::to_string(i) + "]";
    const auto& p = (*pos)[i];
    if (!p.is_array() || p.size() != 3) bad(pf, pf + " must be [x, y, z]");
    pose.positions[i] = {number(p[0], pf), number(p[1], pf), number(p[2], pf)};

    const std::string qf = field + ".rotations[" + std::to_string(i) + "]";
    const auto& q = (*rot)[i];
    if (!q.is_array() || q.size() != 4) bad(qf, qf + " must be [w, x, y, z]");
    const geom::Quat quat{number(q[0], qf), number(q[1], qf), number(q[2], qf), number(q[3], qf)};
    if (std::abs(quat.norm() - 1.0) > 1e-3) {
      bad(qf, qf + " is not a unit quaternion (norm " + std::to_string(quat.norm()) + ")");
    }
    pose.rotations[i] = quat.normalized();
  }
  return pose;
}

json pose_json(const geom::Pose& p) {
  json pos = json::array(), rot = json::array();
  for (const auto& v : p.positions) pos.push_back({v.x, v.y, v.z});
  for (const auto& q : p.rotations) rot.push_back({q.w, q.x, q.y, q.z});
  return {{"positions", pos}, {"rotations", rot}};
}

RequestError not_loaded() {
  return {503, "model_not_loaded", "no checkpoint loaded yet", ""};
}

}  // namespace

void InferenceService::load(const std::filesystem::path& checkpoint) {
  load(model::load_checkpoint(checkpoint));
}

void InferenceService::load(model::Checkpoint ck) {
  auto m = model::model_from_checkpoint<float>(ck);
  auto version = model::model_version(ck);
  auto next = std::make_shared<const Loaded>(Loaded{std::move(ck), std::move(m), std::move(version)});
  std::lock_guard lock(mu_);
  loaded_ = std::move(next);
}

bool InferenceService::loaded() const { return current() != nullptr; }

void InferenceService::set_pose_library(std::vector<NamedPose> poses) {
  auto p = std::make_shared<const std::vector<NamedPose>>(std::move(poses));
  std::lock_guard lock(mu_);
  poses_ = std::move(p);
}

std::shared_ptr<const InferenceService::Loaded> InferenceService::current() const {
  std::lock_guard lock(mu_);
  return loaded_;
}

Response InferenceService::handle_infill(const std::string& body) const {
  try {
    const auto state = current();
    if (!state) throw not_loaded();
    const auto& ck = state->checkpoint;
    const auto J = ck.skeleton.joint_count();

    json req;
    try {
      req = json::parse(body);
    } catch (const json::parse_error& e) {
      throw RequestError{400, "invalid_json", std::string("malformed JSON: ") + e.what(), ""};
    }
    if (!req.is_object()) throw RequestError{400, "invalid_json", "request must be an object", ""};

    if (!req.contains("T")) bad("T", "missing horizon T");
    if (!req["T"].is_number_integer()) bad("T", "T must be an integer");
    const auto T = req["T"].get<std::int64_t>();
    if (T < 2 || T > ck.config.t_max) {
      bad("T", "T = " + std::to_string(T) + " must be in [2, T_max = " +
                   std::to_string(ck.config.t_max) + "]");
    }
    const auto Tf = static_cast<geom::FrameIndex>(T);

    if (!req.contains("label")) bad("label", "missing label (name or id)");
    std::uint32_t label = 0;
    const auto& lj = req["label"];
    if (lj.is_string()) {
      const auto id = ck.labels.find(lj.get<std::string>());
      if (!id) {
        throw RequestError{422, "unknown_label", "unknown label '" + lj.get<std::string>() + "'",
                           "label"};
      }
      label = *id;
    } else if (lj.is_number_integer()) {
      const auto id = lj.get<std::int64_t>();
      if (id < 0 || id >= static_cast<std::int64_t>(ck.config.n_labels)) {
        throw RequestError{422, "unknown_label", "unknown label id " + std::to_string(id), "label"};
      }
      label = static_cast<std::uint32_t>(id);
    } else {
      bad("label", "label must be a name or an integer id");
    }

    if (!req.contains("start")) bad("start", "missing start pose");
    if (!req.contains("target")) bad("target", "missing target pose");
    const auto start = parse_pose(req["start"], "start", J);
    const auto target = parse_pose(req["target"], "target", J);

    std::optional<std::pair<geom::FrameIndex, geom::Pose>> anchor;
    if (req.contains("anchor") && !req["anchor"].is_null()) {
      const auto& a = req["anchor"];
      if (!a.is_object()) bad("anchor", "anchor must be an object with frame and pose");
      if (!a.contains("frame") || !a["frame"].is_number_integer()) {
        bad("anchor.frame", "anchor.frame must be an integer");
      }
      const auto k = a["frame"].get<std::int64_t>();
      if (k <= 1 || k >= T) {
        bad("anchor.frame", "anchor.frame = " + std::to_string(k) + " must satisfy 1 < k < T = " +
                                std::to_string(T));
      }
      if (!a.contains("pose")) bad("anchor.pose", "missing anchor pose");
      anchor.emplace(static_cast<geom::FrameIndex>(k), parse_pose(a["pose"], "anchor.pose", J));
    }

    const auto t0 = std::chrono::steady_clock::now();
    const auto seq = state->model.infill(start, target, anchor, label, Tf, ck.skeleton);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    json frames = json::array();
    for (const auto& f : seq.frames) frames.push_back(pose_json(f));
    json echo = {{"T", T}, {"label", label}, {"label_name", ck.labels.name(label)},
                 {"start", pose_json(start)}, {"target", pose_json(target)}};
    echo["anchor"] = anchor ? json{{"frame", anchor->first}, {"pose", pose_json(anchor->second)}}
                            : json(nullptr);
    json out = {{"frames", frames},
                {"generation_ms", ms},
                {"model_version", state->version},
                {"request", echo}};
    return {200, out.dump()};
  } catch (const RequestError& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return error_response({500, "internal", e.what(), ""});
  }
}

Response InferenceService::handle_metadata() const {
  const auto state = current();
  if (!state) return error_response(not_loaded());
  const auto& ck = state->checkpoint;
  json out = {{"labels", ck.labels.names()},
              {"skeleton",
               {{"joint_names", ck.skeleton.joint_names()},
                {"parents", ck.skeleton.parents()},
                {"ref_lengths", ck.skeleton.ref_lengths()}}},
              {"T_max", ck.config.t_max},
              {"joints", ck.config.joints},
              {"context_frames", ck.config.context_frames},
              {"model_version", state->version},
              {"quaternion_order", "wxyz"}};
  return {200, out.dump()};
}

Response InferenceService::handle_poses() const {
  if (!current()) return error_response(not_loaded());
  std::shared_ptr<const std::vector<NamedPose>> poses;
  {
    std::lock_guard lock(mu_);
    poses = poses_;
  }
  json list = json::array();
  if (poses) {
    for (const auto& p : *poses) list.push_back({{"name", p.name}, {"pose", pose_json(p.pose)}});
  }
  return {200, json{{"poses", list}}.dump()};
}

Response InferenceService::handle_health() const {
  return {200, json{{"status", "ok"}, {"model_loaded", loaded()}}.dump()};
}

}  // namespace cmib::service

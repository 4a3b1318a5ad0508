#include "cmib/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmib/geom/heading.hpp"
#include "cmib/util/error.hpp"
#include "cmib/util/rng.hpp"

namespace cmib::data {

using geom::Quat;
using geom::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHipHeight = 0.95;
constexpr double kWalkStrideHz = 0.9;

enum class Gait { kWalk, kRun, kJump };

Gait gait_for(const std::string& label) {
  if (label == "walk") return Gait::kWalk;
  if (label == "run") return Gait::kRun;
  if (label == "jump") return Gait::kJump;
  throw InvalidArgument("synthetic generator has no motion model for label '" + label + "'");
}

int parent_of(std::uint32_t j) { return j == 0 ? -1 : (j <= 2 ? 0 : static_cast<int>(j) - 2); }

Vec3 offset_of(std::uint32_t j) {
  if (j == 0) return {};
  if (j <= 2) return {0.0, j == 1 ? 0.12 : -0.12, -0.08};
  return {0.0, 0.0, -0.42};
}

struct Params {
  Gait gait;
  double heading;
  Vec3 origin;
  double speed;
  double phase;
  double apex;
};

geom::Pose pose_at(const Params& p, std::uint32_t joints, double tau, double u) {
  const Vec3 forward{std::cos(p.heading), std::sin(p.heading), 0.0};
  double stride_hz = kWalkStrideHz;
  double amplitude = 0.5;
  double bob = 0.02;
  double lean = 0.05;
  if (p.gait == Gait::kRun) {
    stride_hz *= 2.0;
    amplitude = 0.7;
    bob = 0.05;
    lean = 0.15;
  }

  Vec3 root = p.origin + forward * (p.speed * tau);
  double swing[2];
  double bend[2];
  if (p.gait == Gait::kJump) {
    root.z = kHipHeight + 4.0 * p.apex * u * (1.0 - u);
    lean = 0.0;
    const double tuck = std::sin(kPi * u);
    swing[0] = swing[1] = -0.6 * tuck;
    bend[0] = bend[1] = 0.8 * tuck;
  } else {
    const double theta = 2.0 * kPi * stride_hz * tau + p.phase;
    root.z = kHipHeight + bob * std::cos(2.0 * theta);
    for (int c = 0; c < 2; ++c) {
      const double th = theta + kPi * c;
      swing[c] = amplitude * std::sin(th);
      bend[c] = 0.35 * (1.0 - std::cos(th));
    }
  }

  const Quat heading = Quat::about_z(p.heading);
  geom::Pose pose(joints);
  pose.positions[0] = root;
  pose.rotations[0] = heading * Quat::from_axis_angle(Vec3::unit_y(), lean);
  for (std::uint32_t j = 1; j < joints; ++j) {
    const int chain = static_cast<int>((j - 1) % 2);
    const double level = static_cast<double>((j - 1) / 2);
    const double angle = swing[chain] + bend[chain] * level;
    const auto parent = static_cast<std::size_t>(parent_of(j));
    pose.rotations[j] = heading * Quat::from_axis_angle(Vec3::unit_y(), angle);
    pose.positions[j] = pose.positions[parent] + pose.rotations[parent].rotate(offset_of(j));
  }
  for (auto& q : pose.rotations) q = q.normalized().canonical();
  return pose;
}

}  // namespace

geom::Skeleton synthetic_skeleton(std::uint32_t joints) {
  if (joints < 2) throw InvalidArgument("synthetic skeleton needs at least two joints");
  std::vector<std::string> names;
  std::vector<int> parents;
  std::vector<double> lengths;
  std::vector<Vec3> offsets;
  for (std::uint32_t j = 0; j < joints; ++j) {
    if (j == 0) {
      names.emplace_back("root");
    } else {
      names.push_back(std::string((j - 1) % 2 == 0 ? "left" : "right") + std::to_string((j - 1) / 2));
    }
    parents.push_back(parent_of(j));
    offsets.push_back(offset_of(j));
    lengths.push_back(offset_of(j).norm());
  }
  return {names, parents, lengths, offsets};
}

LabelTable synthetic_labels(const SyntheticConfig& cfg) { return LabelTable(cfg.labels); }

std::vector<MotionWindow> gen_synthetic(const SyntheticConfig& cfg) {
  if (cfg.joints < 2) throw InvalidArgument("synthetic data needs J >= 2");
  if (cfg.length < 2) throw InvalidArgument("synthetic windows need T >= 2");
  if (cfg.labels.empty()) throw InvalidArgument("synthetic data needs at least one label");
  const LabelTable table = synthetic_labels(cfg);
  std::vector<Gait> gaits;
  for (const auto& l : cfg.labels) gaits.push_back(gait_for(l));

  std::vector<MotionWindow> out;
  out.reserve(cfg.n_windows);
  for (std::uint32_t i = 0; i < cfg.n_windows; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    const std::size_t li = i % cfg.labels.size();
    Params p;
    p.gait = gaits[li];
    p.heading = rng.uniform(-kPi, kPi);
    p.origin = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0};
    const double base_speed = rng.uniform(0.6, 1.6);
    p.speed = p.gait == Gait::kRun ? 2.0 * base_speed
              : p.gait == Gait::kJump ? rng.uniform(0.3, 1.2)
                                      : base_speed;
    p.phase = rng.uniform(0.0, 2.0 * kPi);
    p.apex = rng.uniform(0.3, 0.7);

    geom::MotionSequence seq;
    seq.fps = cfg.fps;
    seq.label = static_cast<int>(li);
    for (std::uint32_t t = 0; t < cfg.length; ++t) {
      const double u = static_cast<double>(t) / static_cast<double>(cfg.length - 1);
      seq.frames.push_back(pose_at(p, cfg.joints, static_cast<double>(t) / cfg.fps, u));
    }
    const int ref = std::min<int>(10, static_cast<int>(cfg.length));
    auto aligned = geom::align_heading(seq, ref);
    out.push_back(MotionWindow::from_sequence(aligned.sequence, table.id(cfg.labels[li]),
                                              1 + i % 5, "synthetic:" + std::to_string(i)));
  }
  return out;
}

}  // namespace cmib::data

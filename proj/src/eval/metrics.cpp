#include "cmib/eval/metrics.hpp"

#include <cmath>
#include <string>

#include "cmib/util/error.hpp"

namespace cmib::eval {
namespace {

void check_pair(const geom::MotionSequence& a, const geom::MotionSequence& b) {
  if (a.length() != b.length() || a.joint_count() != b.joint_count()) {
    throw InvalidArgument("metric inputs differ: " + std::to_string(a.length()) + " frames x " +
                          std::to_string(a.joint_count()) + " joints vs " +
                          std::to_string(b.length()) + " frames x " +
                          std::to_string(b.joint_count()) + " joints");
  }
  if (a.length() == 0) throw InvalidArgument("metric inputs are empty");
}

}  // namespace

double l2p(const geom::MotionSequence& pred, const geom::MotionSequence& truth,
           const data::NormStats& stats) {
  check_pair(pred, truth);
  const std::size_t J = truth.joint_count();
  if (stats.std.size() < 3 * J) {
    throw InvalidArgument("normalization stats cover " + std::to_string(stats.std.size()) +
                          " components, need " + std::to_string(3 * J));
  }
  double total = 0.0;
  for (std::size_t t = 0; t < truth.length(); ++t) {
    double sq = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const geom::Vec3 d = pred.frames[t].positions[j] - truth.frames[t].positions[j];
      const double c[3] = {d.x, d.y, d.z};
      for (int k = 0; k < 3; ++k) {
        const double z = c[k] / stats.std[3 * j + k];
        sq += z * z;
      }
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(truth.length());
}

double l2q(const geom::MotionSequence& pred, const geom::MotionSequence& truth) {
  check_pair(pred, truth);
  double total = 0.0;
  for (std::size_t t = 0; t < truth.length(); ++t) {
    double sq = 0.0;
    for (std::size_t j = 0; j < truth.joint_count(); ++j) {
      const geom::Quat& qt = truth.frames[t].rotations[j];
      geom::Quat qp = pred.frames[t].rotations[j];
      if (qt.dot(qp) < 0.0) qp = -qp;
      const double dw = qp.w - qt.w, dx = qp.x - qt.x, dy = qp.y - qt.y, dz = qp.z - qt.z;
      sq += dw * dw + dx * dx + dy * dy + dz * dz;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(truth.length());
}

geom::MotionSequence zero_velocity_baseline(const geom::KeyFrames& keys, geom::FrameIndex T) {
  if (T < 2 || !keys.contains(1) || !keys.contains(T)) {
    throw InvalidArgument("zero-velocity baseline needs keys at frames 1 and T = " +
                          std::to_string(T));
  }
  geom::MotionSequence out;
  out.frames.reserve(static_cast<std::size_t>(T));
  const geom::Pose* held = nullptr;
  for (geom::FrameIndex t = 1; t <= T; ++t) {
    if (auto it = keys.find(t); it != keys.end()) held = &it->second;
    out.frames.push_back(*held);
  }
  return out;
}

}  // namespace cmib::eval

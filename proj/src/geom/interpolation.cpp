#include "cmib/geom/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "cmib/util/error.hpp"

namespace cmib::geom {
namespace {

constexpr double kSmallAngle = 1e-6;

void check_anchor(FrameIndex k, FrameIndex T) {
  if (!(1 < k && k < T)) {
    throw InvalidArgument("anchor frame " + std::to_string(k) + " must lie strictly inside (1, " +
                          std::to_string(T) + ")");
  }
}

}  // namespace

Quat slerp_segment(const Quat& qa, const Quat& qb, double u) {
  if (u <= 0.0) return qa;
  if (u >= 1.0) return qb;

  Quat b = qb;
  double c = qa.dot(qb);
  if (c < 0.0) {
    b = -b;
    c = -c;
  }
  const double theta = std::acos(std::min(c, 1.0));
  double wa = 1.0 - u;
  double wb = u;
  if (theta >= kSmallAngle) {
    const double s = std::sin(theta);
    wa = std::sin((1.0 - u) * theta) / s;
    wb = std::sin(u * theta) / s;
  }
  const Quat r{wa * qa.w + wb * b.w, wa * qa.x + wb * b.x, wa * qa.y + wb * b.y,
               wa * qa.z + wb * b.z};
  return r.normalized();
}

Vec3 lerp_segment(const Vec3& pa, const Vec3& pb, FrameIndex t, FrameIndex a, FrameIndex b) {
  if (t == a) return pa;
  if (t == b) return pb;
  const double span = static_cast<double>(b - a);
  return (pa * static_cast<double>(b - t) + pb * static_cast<double>(t - a)) / span;
}

Quat slerp_segment(const Quat& qa, const Quat& qb, FrameIndex t, FrameIndex a, FrameIndex b) {
  if (t == a) return qa;
  if (t == b) return qb;
  return slerp_segment(qa, qb, static_cast<double>(t - a) / static_cast<double>(b - a));
}

Vec3 piecewise_lerp(const Vec3& p_start, const Vec3& p_k, const Vec3& p_target, FrameIndex t,
                    FrameIndex k, FrameIndex T) {
  check_anchor(k, T);
  return t < k ? lerp_segment(p_start, p_k, t, 1, k) : lerp_segment(p_k, p_target, t, k, T);
}

Quat piecewise_slerp(const Quat& q_start, const Quat& q_k, const Quat& q_target, FrameIndex t,
                     FrameIndex k, FrameIndex T) {
  check_anchor(k, T);
  return t < k ? slerp_segment(q_start, q_k, t, 1, k) : slerp_segment(q_k, q_target, t, k, T);
}

MotionSequence interpolate_missing(const KeyFrames& keys, FrameIndex T) {
  if (T < 2) throw InvalidArgument("sequence length must be at least 2");
  if (!keys.contains(1) || !keys.contains(T)) {
    throw InvalidArgument("key frames must include frame 1 and frame " + std::to_string(T));
  }
  const std::size_t joints = keys.begin()->second.joint_count();
  for (const auto& [frame, pose] : keys) {
    if (frame < 1 || frame > T) {
      throw InvalidArgument("key frame " + std::to_string(frame) + " outside [1, T]");
    }
    if (pose.joint_count() != joints || pose.rotations.size() != joints) {
      throw InvalidArgument("key poses disagree on joint count");
    }
  }

  MotionSequence out;
  out.frames.resize(static_cast<std::size_t>(T));
  for (auto it = keys.begin(); std::next(it) != keys.end(); ++it) {
    const auto& [a, pa] = *it;
    const auto& [b, pb] = *std::next(it);
    out.frames[static_cast<std::size_t>(a - 1)] = pa;
    for (FrameIndex t = a + 1; t < b; ++t) {
      Pose p(joints);
      for (std::size_t j = 0; j < joints; ++j) {
        p.positions[j] = lerp_segment(pa.positions[j], pb.positions[j], t, a, b);
        p.rotations[j] = slerp_segment(pa.rotations[j], pb.rotations[j], t, a, b);
      }
      out.frames[static_cast<std::size_t>(t - 1)] = std::move(p);
    }
  }
  out.frames.back() = keys.rbegin()->second;
  return out;
}

}  // namespace cmib::geom

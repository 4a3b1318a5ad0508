#include "cmib/geom/heading.hpp"

#include <cmath>
#include <string>

#include "cmib/util/error.hpp"

namespace cmib::geom {

double facing_angle(const Pose& pose, const HeadingOptions& opts) {
  Vec3 forward;
  if (opts.source == HeadingOptions::Source::kRootForward) {
    const auto root = static_cast<std::size_t>(opts.root_joint);
    if (root >= pose.joint_count()) throw InvalidArgument("root joint index out of range");
    forward = pose.rotations[root].rotate(Vec3::unit_x());
  } else {
    const auto n = static_cast<int>(pose.joint_count());
    if (opts.left_hip < 0 || opts.right_hip < 0 || opts.left_hip >= n || opts.right_hip >= n) {
      throw InvalidArgument("hip-vector heading needs valid left/right hip joints");
    }
    const Vec3 across = pose.positions[static_cast<std::size_t>(opts.left_hip)] -
                        pose.positions[static_cast<std::size_t>(opts.right_hip)];
    forward = across.cross(Vec3::unit_z());
  }
  if (std::hypot(forward.x, forward.y) < 1e-9) {
    throw InvalidArgument("facing direction has no horizontal component");
  }
  return std::atan2(forward.y, forward.x);
}

Pose rotate_about_vertical(const Pose& pose, double angle, const Vec3& pivot) {
  const Quat r = Quat::about_z(angle);
  Pose out = pose;
  for (std::size_t j = 0; j < pose.joint_count(); ++j) {
    out.positions[j] = pivot + r.rotate(pose.positions[j] - pivot);
    out.rotations[j] = r * pose.rotations[j];
  }
  return out;
}

HeadingAlignment align_heading(const MotionSequence& seq, FrameIndex ref_frame,
                               const HeadingOptions& opts) {
  if (ref_frame < 1 || static_cast<std::size_t>(ref_frame) > seq.length()) {
    throw InvalidArgument("heading reference frame " + std::to_string(ref_frame) +
                          " outside the sequence");
  }
  const double heading = facing_angle(seq.frames[static_cast<std::size_t>(ref_frame - 1)], opts);
  HeadingAlignment out{seq, -heading};
  if (heading == 0.0) return out;
  for (Pose& p : out.sequence.frames) p = rotate_about_vertical(p, -heading);
  return out;
}

}  // namespace cmib::geom

#pragma once

#include "cmib/geom/pose.hpp"

namespace cmib::geom {

// How the character's facing direction is read from a pose. The vertical
// axis is +Z and forward is +X.
struct HeadingOptions {
  enum class Source {
    kRootForward,  // root rotation applied to +X, projected to the ground
    kHipVector,    // (left hip - right hip) x up
  };
  Source source = Source::kRootForward;
  int root_joint = 0;
  int left_hip = -1;
  int right_hip = -1;
};

// Facing direction as an angle about +Z (atan2 of the horizontal
// projection). Throws InvalidArgument when the projection has zero length.
double facing_angle(const Pose& pose, const HeadingOptions& opts = {});

// Rotates all positions about the vertical axis through `pivot` and composes
// the same rotation onto all joint rotations.
Pose rotate_about_vertical(const Pose& pose, double angle, const Vec3& pivot = {});

struct HeadingAlignment {
  MotionSequence sequence;
  double angle = 0.0;  // rotation applied about +Z, radians
};

/// Rotates a whole sequence about the vertical axis through the origin so
/// that the character faces +X at `ref_frame` (1-based).
HeadingAlignment align_heading(const MotionSequence& seq, FrameIndex ref_frame = 10,
                               const HeadingOptions& opts = {});

}  // namespace cmib::geom

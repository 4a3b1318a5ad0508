#pragma once

#include "cmib/geom/pose.hpp"

namespace cmib::geom {

/// Spherical linear interpolation on the shorter arc from qa to qb.
///
/// qb is negated first when qa.qb < 0. Below 1e-6 rad the routine falls
/// back to normalized linear interpolation. u = 0 and u = 1 return qa and
/// qb unchanged.
Quat slerp_segment(const Quat& qa, const Quat& qb, double u);

// Linear interpolation between key frames a < b evaluated at frame t.
// Returns pa at t == a and pb at t == b exactly.
Vec3 lerp_segment(const Vec3& pa, const Vec3& pb, FrameIndex t, FrameIndex a, FrameIndex b);

// Slerp between key frames a < b evaluated at frame t.
Quat slerp_segment(const Quat& qa, const Quat& qb, FrameIndex t, FrameIndex a, FrameIndex b);

// Three-point interpolation through an anchor at frame k, 1 < k < T.
// Throws InvalidArgument otherwise.
Vec3 piecewise_lerp(const Vec3& p_start, const Vec3& p_k, const Vec3& p_target, FrameIndex t,
                    FrameIndex k, FrameIndex T);
Quat piecewise_slerp(const Quat& q_start, const Quat& q_k, const Quat& q_target, FrameIndex t,
                     FrameIndex k, FrameIndex T);

/// Fills frames 1..T from key poses.
///
/// Keys must include frames 1 and T; every gap between consecutive keys is
/// filled per joint with lerp (positions) and slerp (rotations). Key frames
/// are copied verbatim.
MotionSequence interpolate_missing(const KeyFrames& keys, FrameIndex T);

}  // namespace cmib::geom

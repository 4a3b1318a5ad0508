#pragma once

#include "cmib/data/dataset.hpp"
#include "cmib/geom/pose.hpp"

namespace cmib::eval {

/// Mean over frames of the L2 norm of the standardized 3J position
/// difference. Standardization uses the position entries of `stats`.
double l2p(const geom::MotionSequence& pred, const geom::MotionSequence& truth,
           const data::NormStats& stats);

/// Mean over frames of the L2 norm of the 4J quaternion difference. Each
/// predicted quaternion is sign-matched to the ground truth's hemisphere
/// first, so q and -q compare equal.
double l2q(const geom::MotionSequence& pred, const geom::MotionSequence& truth);

/// Holds the most recent key pose until the next key; keys must include 1
/// and T.
geom::MotionSequence zero_velocity_baseline(const geom::KeyFrames& keys, geom::FrameIndex T);

}  // namespace cmib::eval

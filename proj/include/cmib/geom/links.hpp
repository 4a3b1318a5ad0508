#pragma once

#include "cmib/geom/pose.hpp"

namespace cmib::geom {

/// Restores reference bone lengths while keeping every bone direction.
///
/// Walks the tree root-to-leaves; each child is placed at
/// parent' + (child - parent) * ref / |child - parent|. The root position and
/// all rotations pass through. Throws InvalidArgument naming the joint when a
/// predicted bone is shorter than 1e-9.
Pose rescale_links(const Pose& pose, const Skeleton& skeleton);

}  // namespace cmib::geom

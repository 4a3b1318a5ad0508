#include "cmib/geom/links.hpp"

#include <string>

#include "cmib/util/error.hpp"

namespace cmib::geom {

Pose rescale_links(const Pose& pose, const Skeleton& skeleton) {
  if (pose.joint_count() != skeleton.joint_count()) {
    throw InvalidArgument("pose has " + std::to_string(pose.joint_count()) +
                          " joints, skeleton has " + std::to_string(skeleton.joint_count()));
  }
  Pose out = pose;
  const auto& parents = skeleton.parents();
  const auto& lengths = skeleton.ref_lengths();
  for (int j : skeleton.topological_order()) {
    const int p = parents[static_cast<std::size_t>(j)];
    if (p < 0) continue;
    const auto ju = static_cast<std::size_t>(j);
    const auto pu = static_cast<std::size_t>(p);
    const Vec3 bone = pose.positions[ju] - pose.positions[pu];
    const double len = bone.norm();
    if (len < 1e-9) {
      throw InvalidArgument("predicted bone for joint '" + skeleton.joint_names()[ju] +
                            "' has zero length");
    }
    out.positions[ju] = out.positions[pu] + bone * (lengths[ju] / len);
  }
  return out;
}

}  // namespace cmib::geom

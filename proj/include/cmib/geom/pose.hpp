#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmib/geom/quaternion.hpp"
#include "cmib/geom/vec3.hpp"

namespace cmib::geom {

// Frame numbers in keyframe maps and interpolation routines are 1-based:
// frame 1 is the start pose and frame T the target pose.
using FrameIndex = int;

/// Global joint positions (meters) and global joint rotations.
struct Pose {
  std::vector<Vec3> positions;
  std::vector<Quat> rotations;

  Pose() = default;
  explicit Pose(std::size_t joints)
      : positions(joints), rotations(joints, Quat::identity()) {}

  std::size_t joint_count() const { return positions.size(); }

  // Throws InvalidArgument if the sizes disagree, a position is non-finite
  // or a rotation is off the unit sphere by more than `norm_tolerance`.
  void validate(double norm_tolerance = 1e-6) const;

  bool operator==(const Pose&) const = default;
};

/// Joint hierarchy with reference bone lengths.
///
/// Parents may appear in any order; topological_order() gives a
/// root-to-leaves traversal. rest_offsets are kept when known (BVH input)
/// so motion can be written back out.
class Skeleton {
 public:
  Skeleton() = default;
  Skeleton(std::vector<std::string> joint_names, std::vector<int> parents,
           std::vector<double> ref_lengths, std::vector<Vec3> rest_offsets = {});

  std::size_t joint_count() const { return parents_.size(); }
  const std::vector<std::string>& joint_names() const { return names_; }
  const std::vector<int>& parents() const { return parents_; }
  // Per-joint bone length to the parent; 0 for the root.
  const std::vector<double>& ref_lengths() const { return ref_lengths_; }
  const std::vector<Vec3>& rest_offsets() const { return rest_offsets_; }
  const std::vector<int>& topological_order() const { return order_; }
  int root() const { return order_.front(); }

 private:
  std::vector<std::string> names_;
  std::vector<int> parents_;
  std::vector<double> ref_lengths_;
  std::vector<Vec3> rest_offsets_;
  std::vector<int> order_;
};

struct MotionSequence {
  std::vector<Pose> frames;
  double fps = 30.0;
  std::optional<int> label;

  std::size_t length() const { return frames.size(); }
  std::size_t joint_count() const { return frames.empty() ? 0 : frames.front().joint_count(); }

  // T >= 2 and a shared joint count.
  void validate() const;
};

using KeyFrames = std::map<FrameIndex, Pose>;

}  // namespace cmib::geom

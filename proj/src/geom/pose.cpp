#include "cmib/geom/pose.hpp"

#include <cmath>
#include <string>

#include "cmib/util/error.hpp"

namespace cmib::geom {

void Pose::validate(double norm_tolerance) const {
  if (positions.size() != rotations.size()) {
    throw InvalidArgument("pose has " + std::to_string(positions.size()) + " positions but " +
                          std::to_string(rotations.size()) + " rotations");
  }
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (!positions[j].is_finite()) {
      throw InvalidArgument("non-finite position at joint " + std::to_string(j));
    }
    const Quat& q = rotations[j];
    if (!q.is_finite() || std::abs(q.dot(q) - 1.0) >= norm_tolerance) {
      throw InvalidArgument("rotation at joint " + std::to_string(j) + " is not unit norm");
    }
  }
}

Skeleton::Skeleton(std::vector<std::string> joint_names, std::vector<int> parents,
                   std::vector<double> ref_lengths, std::vector<Vec3> rest_offsets)
    : names_(std::move(joint_names)),
      parents_(std::move(parents)),
      ref_lengths_(std::move(ref_lengths)),
      rest_offsets_(std::move(rest_offsets)) {
  const std::size_t n = parents_.size();
  if (n == 0) throw InvalidArgument("skeleton has no joints");
  if (names_.empty()) {
    for (std::size_t j = 0; j < n; ++j) names_.push_back("joint" + std::to_string(j));
  }
  if (names_.size() != n || ref_lengths_.size() != n) {
    throw InvalidArgument("skeleton field sizes disagree with the parent array");
  }
  if (!rest_offsets_.empty() && rest_offsets_.size() != n) {
    throw InvalidArgument("rest offsets size disagrees with the parent array");
  }

  int root = -1;
  std::vector<std::vector<int>> children(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int p = parents_[j];
    if (p == -1) {
      if (root != -1) throw InvalidArgument("skeleton has more than one root");
      root = static_cast<int>(j);
      continue;
    }
    if (p < 0 || static_cast<std::size_t>(p) >= n || static_cast<std::size_t>(p) == j) {
      throw InvalidArgument("joint " + names_[j] + " has invalid parent " + std::to_string(p));
    }
    if (!(ref_lengths_[j] > 0.0)) {
      throw InvalidArgument("joint " + names_[j] + " has non-positive reference length");
    }
    children[static_cast<std::size_t>(p)].push_back(static_cast<int>(j));
  }
  if (root == -1) throw InvalidArgument("skeleton has no root");
  ref_lengths_[static_cast<std::size_t>(root)] = 0.0;

  // Breadth-first from the root; a cycle leaves joints unreached.
  order_.reserve(n);
  order_.push_back(root);
  for (std::size_t i = 0; i < order_.size(); ++i) {
    for (int c : children[static_cast<std::size_t>(order_[i])]) order_.push_back(c);
  }
  if (order_.size() != n) throw InvalidArgument("skeleton parent array contains a cycle");
}

void MotionSequence::validate() const {
  if (frames.size() < 2) throw InvalidArgument("motion sequence needs at least two frames");
  const std::size_t j = frames.front().joint_count();
  for (const Pose& p : frames) {
    if (p.joint_count() != j) throw InvalidArgument("motion frames disagree on joint count");
  }
}

}  // namespace cmib::geom

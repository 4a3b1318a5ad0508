#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmib/data/labels.hpp"
#include "cmib/data/window.hpp"

namespace cmib::data {

/// Procedural locomotion used as a stand-in for licensed capture data.
///
/// Supported labels: "walk" (leg swing plus constant root velocity), "run"
/// (walk at twice the stride frequency and speed), "jump" (ballistic root
/// arc that lands at the start height on the last frame). Window i gets
/// label labels[i % n] and subject 1 + i % 5.
struct SyntheticConfig {
  std::uint32_t joints = 4;
  std::uint32_t length = 32;
  std::uint32_t n_windows = 64;
  std::vector<std::string> labels = {"walk", "run", "jump"};
  std::uint64_t seed = 0;
  double fps = 30.0;
};

// Two interleaved leg chains hanging off the root: odd joints form the
// left chain, even joints the right one.
geom::Skeleton synthetic_skeleton(std::uint32_t joints);

LabelTable synthetic_labels(const SyntheticConfig& cfg);

// Bit-identical output for identical configs. Windows are heading-aligned
// at frame 10 like captured data.
std::vector<MotionWindow> gen_synthetic(const SyntheticConfig& cfg);

}  // namespace cmib::data

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cmib/data/window.hpp"
#include "cmib/geom/heading.hpp"

namespace cmib::data {

struct WindowingConfig {
  std::uint32_t length = 65;
  std::uint32_t stride = 20;
  geom::FrameIndex heading_frame = 10;
  geom::HeadingOptions heading;
};

/// Cuts fixed-length windows starting at frames 1, 1 + stride, ...
///
/// Each window is heading-aligned on its own at `heading_frame` (clamped to
/// the window length). A sequence shorter than the window yields nothing.
std::vector<MotionWindow> make_windows(const geom::MotionSequence& seq, const WindowingConfig& cfg,
                                       std::uint32_t subject, const std::string& source = {});

// Disjoint train/test subject sets.
struct SubjectSplit {
  std::set<std::uint32_t> train;
  std::set<std::uint32_t> test;

  void validate() const;  // throws when the sets intersect

  // Train/test subject presets for the public benchmarks. HDM05 actors
  // are numbered bk=1, dg=2, mm=3, tr=4 (see hdm05_subject_id).
  static SubjectSplit lafan1();
  static SubjectSplit humaneva();
  static SubjectSplit human4d();
  static SubjectSplit hdm05();
  static SubjectSplit preset(const std::string& name);
};

std::uint32_t hdm05_subject_id(const std::string& actor);

struct SplitWindows {
  std::vector<MotionWindow> train;
  std::vector<MotionWindow> test;
};

// Throws InvalidArgument when a window's subject is in neither set.
SplitWindows split_by_subject(std::vector<MotionWindow> windows, const SubjectSplit& split);

/// Per-component standardization statistics of the 3J position block.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr double kStdFloor = 1e-8;

// Population mean/std over every frame of every window. Throws on empty input.
NormStats compute_norm_stats(const std::vector<MotionWindow>& train_windows);

}  // namespace cmib::data

#include "cmib/data/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "cmib/util/error.hpp"

namespace cmib::data {

std::vector<MotionWindow> make_windows(const geom::MotionSequence& seq, const WindowingConfig& cfg,
                                       std::uint32_t subject, const std::string& source) {
  if (cfg.length < 2 || cfg.stride < 1) throw InvalidArgument("bad windowing configuration");
  std::vector<MotionWindow> out;
  if (seq.length() < cfg.length) return out;
  const geom::FrameIndex ref = std::min<geom::FrameIndex>(cfg.heading_frame,
                                                         static_cast<int>(cfg.length));
  const auto label = static_cast<std::uint32_t>(seq.label.value_or(0));
  for (std::size_t start = 0; start + cfg.length <= seq.length(); start += cfg.stride) {
    geom::MotionSequence part;
    part.fps = seq.fps;
    part.label = seq.label;
    part.frames.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(start),
                       seq.frames.begin() + static_cast<std::ptrdiff_t>(start + cfg.length));
    auto aligned = geom::align_heading(part, ref, cfg.heading);
    out.push_back(MotionWindow::from_sequence(aligned.sequence, label, subject,
                                              source + "@" + std::to_string(start + 1)));
  }
  return out;
}

void SubjectSplit::validate() const {
  for (auto s : train) {
    if (test.contains(s)) {
      throw InvalidArgument("subject " + std::to_string(s) + " is in both train and test sets");
    }
  }
}

SubjectSplit SubjectSplit::lafan1() { return {{1, 2, 3, 4}, {5}}; }
SubjectSplit SubjectSplit::humaneva() { return {{1, 2}, {3}}; }
SubjectSplit SubjectSplit::human4d() { return {{1, 2, 3, 4, 5, 6, 7}, {8}}; }
SubjectSplit SubjectSplit::hdm05() {
  return {{hdm05_subject_id("bk"), hdm05_subject_id("dg"), hdm05_subject_id("mm")},
          {hdm05_subject_id("tr")}};
}

SubjectSplit SubjectSplit::preset(const std::string& name) {
  if (name == "lafan1") return lafan1();
  if (name == "humaneva") return humaneva();
  if (name == "human4d") return human4d();
  if (name == "hdm05") return hdm05();
  throw InvalidArgument("unknown split preset '" + name + "'");
}

std::uint32_t hdm05_subject_id(const std::string& actor) {
  if (actor == "bk") return 1;
  if (actor == "dg") return 2;
  if (actor == "mm") return 3;
  if (actor == "tr") return 4;
  throw InvalidArgument("unknown HDM05 actor '" + actor + "'");
}

SplitWindows split_by_subject(std::vector<MotionWindow> windows, const SubjectSplit& split) {
  split.validate();
  SplitWindows out;
  for (auto& w : windows) {
    if (split.train.contains(w.subject)) {
      out.train.push_back(std::move(w));
    } else if (split.test.contains(w.subject)) {
      out.test.push_back(std::move(w));
    } else {
      throw InvalidArgument("window subject " + std::to_string(w.subject) +
                            " is not covered by the split");
    }
  }
  return out;
}

NormStats compute_norm_stats(const std::vector<MotionWindow>& train_windows) {
  if (train_windows.empty()) throw InvalidArgument("cannot compute statistics of an empty set");
  const std::size_t n = 3 * train_windows.front().joints;
  std::vector<double> sum(n, 0.0);
  std::vector<double> sum_sq(n, 0.0);
  std::size_t count = 0;
  for (const auto& w : train_windows) {
    if (3 * w.joints != n) throw InvalidArgument("training windows disagree on joint count");
    for (std::uint32_t t = 0; t < w.length; ++t) {
      const auto r = w.row(t);
      for (std::size_t c = 0; c < n; ++c) sum[c] += r[c];
      ++count;
    }
  }
  NormStats s{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t c = 0; c < n; ++c) s.mean[c] = sum[c] / static_cast<double>(count);
  // Second pass keeps the variance free of cancellation.
  for (const auto& w : train_windows) {
    for (std::uint32_t t = 0; t < w.length; ++t) {
      const auto r = w.row(t);
      for (std::size_t c = 0; c < n; ++c) {
        const double d = r[c] - s.mean[c];
        sum_sq[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    s.std[c] = std::max(std::sqrt(sum_sq[c] / static_cast<double>(count)), kStdFloor);
  }
  return s;
}

}  // namespace cmib::data

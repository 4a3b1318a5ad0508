#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cmib/data/dataset.hpp"
#include "cmib/data/labels.hpp"
#include "cmib/model/model.hpp"

namespace cmib::eval {

enum class Method { kZeroVelocity, kInterp, kModel };
const char* method_name(Method m);

/// Shared inputs for every protocol. The model may be null, in which case
/// only the baselines are evaluated.
struct EvalContext {
  const model::CmibModel<float>* model = nullptr;
  geom::Skeleton skeleton;
  data::NormStats stats;
  data::LabelTable labels;
  std::uint32_t context_frames = 1;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct WindowScore {
  Method method;
  std::uint32_t horizon;
  std::size_t window;
  double l2p;
  double l2q;
};

struct MibRow {
  Method method;
  std::uint32_t horizon;
  double l2p;
  double l2q;
};

/// In-betweening on the leading `horizon` frames of each window with keys
/// {1..context, horizon}; windows shorter than a horizon are skipped for it.
struct MibResult {
  std::vector<MibRow> rows;
  std::vector<WindowScore> per_window;
  double mean_l2p(Method m, std::uint32_t horizon) const;
};
MibResult evaluate_mib(const EvalContext& ctx, const std::vector<data::MotionWindow>& windows,
                       const std::vector<std::uint32_t>& horizons);

struct AnchorEvalConfig {
  std::vector<geom::FrameIndex> anchor_frames = {20, 40, 60};
  double radius = 0.5;  // meters; perturbation drawn uniformly from a disk
  std::uint64_t seed = 0;
};

struct AnchorRow {
  geom::FrameIndex frame;
  double l2_m;           // meters, root (x, y)
  double l2_normalized;  // root (x, y) difference divided by per-axis std
  double interp_l2_m;    // interpolation with the same keys, for reference
  std::size_t windows;
};

/// For each window and anchor frame t: shift the ground-truth pose at t by
/// a random root (x, y) offset, turn the start pose to face the shifted
/// anchor and the target to face away from it, infill with keys {1, t, T}
/// and measure how far the generated root lands from the requested one.
std::vector<AnchorRow> anchor_eval(const EvalContext& ctx,
                                   const std::vector<data::MotionWindow>& windows,
                                   const AnchorEvalConfig& cfg);

/// Entry (r, c) is the mean L2P over windows whose true label is rows[r]
/// when the model is conditioned on label cols[c]. No anchor is given.
struct SemanticMatrix {
  std::vector<std::uint32_t> rows;  // true labels present in the data
  std::vector<std::uint32_t> cols;  // every label
  std::vector<std::vector<double>> l2p;
  std::vector<std::string> warnings;
  // Rows whose minimum lies on the diagonal.
  std::size_t diagonal_minimum_rows() const;
};
SemanticMatrix semantic_matrix(const EvalContext& ctx,
                               const std::vector<data::MotionWindow>& windows);

struct LatencyRow {
  std::uint32_t batch;
  std::uint32_t horizon;
  std::uint32_t trials;
  double mean_s;
  double std_s;
};

/// Wall-clock time of eval-mode infill for `batch` sequential requests of
/// length `horizon`, averaged over `trials` repetitions after one warm-up.
std::vector<LatencyRow> bench_inference(const model::CmibModel<float>& model,
                                        const geom::Skeleton& skeleton,
                                        const data::MotionWindow& sample,
                                        const std::vector<std::uint32_t>& batch_sizes,
                                        const std::vector<std::uint32_t>& horizons,
                                        std::uint32_t trials = 30);

struct EvalReport {
  std::optional<MibResult> mib;
  std::vector<AnchorRow> anchor;
  std::optional<SemanticMatrix> semantic;
  std::vector<LatencyRow> latency;
};

nlohmann::json to_json(const EvalReport& r, const data::LabelTable& labels);
void write_text_report(std::ostream& os, const EvalReport& r, const data::LabelTable& labels);
// Columns: method, horizon, window, l2p, l2q.
void write_per_window_csv(std::ostream& os, const MibResult& r);

}  // namespace cmib::eval

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cmib/autodiff/adamw.hpp"
#include "cmib/data/window.hpp"
#include "cmib/grp/grp.hpp"
#include "cmib/model/checkpoint.hpp"
#include "cmib/model/model.hpp"
#include "cmib/util/rng.hpp"

namespace cmib::train {

struct LossWeights {
  double w_sem = 1.5;
  double w_pos = 0.05;
  double w_rot = 2.0;
};

struct TrainConfig {
  std::uint32_t batch_size = 32;
  std::int64_t steps = 1000;
  std::uint64_t seed = 0;
  // Probability that a batch item gets one interior anchor key.
  double anchor_probability = 0.5;
  LossWeights weights;
  ad::AdamWConfig optimizer;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
  bool augment = false;
  grp::GrpConfig grp;
  // Checkpoint cadence in steps when a run directory is given (0: final only).
  std::int64_t checkpoint_every = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);

/// Key frames for one training item: {1..context, T}, plus with probability
/// anchor_probability one k drawn uniformly from {context+1 .. T-1}.
std::set<geom::FrameIndex> sample_key_set(geom::FrameIndex T, double anchor_probability, Rng& rng,
                                          std::uint32_t context_frames = 1);

struct LossValues {
  double sem = 0.0;  // scaled, unweighted
  double pos = 0.0;
  double rot = 0.0;
  double total = 0.0;  // weighted sum of the scaled terms
};

template <class T>
struct LossVars {
  typename ad::Graph<T>::Var sem, pos, rot, total;
};

/// Mean-L1 losses of an encoder output against its window.
///
/// pred is (T+1) x d; row 0 is compared with s_embed, rows 1..T with
/// truth (T x d) split into the 3J position and 4J rotation columns. Each
/// term is divided by its scale before weighting.
template <class T>
LossVars<T> compute_losses(ad::Graph<T>& g, typename ad::Graph<T>::Var pred,
                           const ad::Tensor<T>& truth, typename ad::Graph<T>::Var s_embed,
                           const model::LossScales& scales, const LossWeights& weights);

// Non-differentiable convenience wrapper.
template <class T>
LossValues compute_losses(const ad::Tensor<T>& pred, const ad::Tensor<T>& truth,
                          const ad::Tensor<T>& s_embed, const model::LossScales& scales,
                          const LossWeights& weights);

template <class T>
ad::Tensor<T> window_matrix(const data::MotionWindow& w);

// One training item: window plus the keys its input is interpolated from.
struct BatchItem {
  const data::MotionWindow* window = nullptr;
  std::set<geom::FrameIndex> keys;
};

// Raw (unscaled) eval-mode loss terms averaged over the batch, floored at
// 1e-8.
template <class T>
model::LossScales calibrate_loss_scales(const model::CmibModel<T>& m,
                                        const std::vector<BatchItem>& batch);

struct LossRow {
  std::int64_t step = 0;
  LossValues loss;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::int64_t step, std::optional<std::filesystem::path> last_good);
  std::int64_t step;
  std::optional<std::filesystem::path> last_good;
};

struct TrainResult {
  model::Checkpoint checkpoint;
  std::vector<LossRow> trace;
  std::size_t pool_size = 0;  // windows after augmentation
};

struct TrainInputs {
  std::vector<data::MotionWindow> windows;
  data::LabelTable labels;
  geom::Skeleton skeleton;
  std::optional<data::NormStats> stats;
};

struct TrainHooks {
  // Run directory for config.json, loss.csv and checkpoints; nothing is
  // written when unset.
  std::optional<std::filesystem::path> run_dir;
  // Continue from a checkpoint: its parameters, loss scales and step count.
  std::optional<model::Checkpoint> resume;
  std::function<void(const LossRow&)> on_step;
};

/// Step-budgeted training. Each step draws batch_size windows with
/// replacement, samples fresh keys per item, rebuilds the input from
/// interpolation of the keys only, and applies one clipped AdamW update on
/// the batch-mean loss. Loss scales are calibrated on the first batch.
/// Deterministic for a given seed.
TrainResult train(const TrainInputs& inputs, const model::CmibConfig& model_cfg,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& trace);

}  // namespace cmib::train

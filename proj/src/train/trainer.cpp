#include "cmib/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmib/util/binary_io.hpp"

namespace cmib::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("train config: " + msg); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (steps < 0) fail("steps must be >= 0");
  if (!(anchor_probability >= 0.0 && anchor_probability <= 1.0)) {
    fail("anchor_probability must be in [0, 1]");
  }
  if (!(weights.w_sem > 0 && weights.w_pos > 0 && weights.w_rot > 0)) {
    fail("loss weights must be > 0");
  }
  if (!(optimizer.lr > 0)) fail("lr must be > 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  std::vector<std::string> labels(c.grp.labels.begin(), c.grp.labels.end());
  return {{"batch_size", c.batch_size},
          {"steps", c.steps},
          {"seed", c.seed},
          {"anchor_probability", c.anchor_probability},
          {"weights", {{"w_sem", c.weights.w_sem}, {"w_pos", c.weights.w_pos}, {"w_rot", c.weights.w_rot}}},
          {"optimizer",
           {{"lr", c.optimizer.lr},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps},
            {"weight_decay", c.optimizer.weight_decay}}},
          {"clip_norm", c.clip_norm},
          {"augment", c.augment},
          {"grp",
           {{"length_scale", c.grp.length_scale ? nlohmann::json(*c.grp.length_scale) : nlohmann::json()},
            {"kernel_spans", c.grp.kernel_spans},
            {"jitter", c.grp.jitter},
            {"n_samples", c.grp.n_samples},
            {"labels", labels}}},
          {"checkpoint_every", c.checkpoint_every}};
}

std::set<geom::FrameIndex> sample_key_set(geom::FrameIndex T, double anchor_probability, Rng& rng,
                                          std::uint32_t context_frames) {
  const auto c = static_cast<geom::FrameIndex>(std::max<std::uint32_t>(context_frames, 1));
  std::set<geom::FrameIndex> keys;
  for (geom::FrameIndex t = 1; t <= std::min(c, T); ++t) keys.insert(t);
  keys.insert(T);
  if (c + 1 <= T - 1 && rng.bernoulli(anchor_probability)) {
    keys.insert(static_cast<geom::FrameIndex>(rng.uniform_int(c + 1, T - 1)));
  }
  return keys;
}

template <class T>
LossVars<T> compute_losses(ad::Graph<T>& g, typename ad::Graph<T>::Var pred,
                           const ad::Tensor<T>& truth, typename ad::Graph<T>::Var s_embed,
                           const model::LossScales& scales, const LossWeights& weights) {
  const auto& ps = g.shape(pred);
  if (ps.rows != truth.rows() + 1 || ps.cols != truth.cols() || truth.cols() % 7 != 0) {
    throw ShapeError("compute_losses: prediction " + ps.str() + " does not match truth " +
                     truth.shape().str() + " plus a semantic row");
  }
  const std::size_t J = truth.cols() / 7;
  const auto frames = g.slice_rows(pred, 1, truth.rows());
  const auto y = g.constant(truth);
  LossVars<T> v;
  v.sem = g.scale(g.l1_loss(g.slice_rows(pred, 0, 1), s_embed), static_cast<T>(1.0 / scales.c_sem));
  v.pos = g.scale(g.l1_loss(g.slice_cols(frames, 0, 3 * J), g.slice_cols(y, 0, 3 * J)),
                  static_cast<T>(1.0 / scales.c_pos));
  v.rot = g.scale(g.l1_loss(g.slice_cols(frames, 3 * J, 4 * J), g.slice_cols(y, 3 * J, 4 * J)),
                  static_cast<T>(1.0 / scales.c_rot));
  v.total = g.add(g.add(g.scale(v.sem, static_cast<T>(weights.w_sem)),
                        g.scale(v.pos, static_cast<T>(weights.w_pos))),
                  g.scale(v.rot, static_cast<T>(weights.w_rot)));
  return v;
}

template <class T>
LossValues compute_losses(const ad::Tensor<T>& pred, const ad::Tensor<T>& truth,
                          const ad::Tensor<T>& s_embed, const model::LossScales& scales,
                          const LossWeights& weights) {
  ad::Graph<T> g;
  const auto v = compute_losses(g, g.constant(pred), truth, g.constant(s_embed), scales, weights);
  return {g.value(v.sem)[0], g.value(v.pos)[0], g.value(v.rot)[0], g.value(v.total)[0]};
}

template <class T>
ad::Tensor<T> window_matrix(const data::MotionWindow& w) {
  ad::Tensor<T> out(w.length, w.dim());
  for (std::size_t i = 0; i < w.X.size(); ++i) out[i] = static_cast<T>(w.X[i]);
  return out;
}

namespace {

geom::KeyFrames key_poses(const data::MotionWindow& w, const std::set<geom::FrameIndex>& keys) {
  geom::KeyFrames out;
  for (auto k : keys) out.emplace(k, w.pose_at(k));
  return out;
}

}  // namespace

template <class T>
model::LossScales calibrate_loss_scales(const model::CmibModel<T>& m,
                                        const std::vector<BatchItem>& batch) {
  if (batch.empty()) throw InvalidArgument("calibrate_loss_scales: empty batch");
  const model::LossScales unit;
  double sem = 0, pos = 0, rot = 0;
  for (const auto& item : batch) {
    const auto& w = *item.window;
    const auto in = m.build_input(key_poses(w, item.keys), static_cast<geom::FrameIndex>(w.length),
                                  w.label);
    const auto out = m.forward(in);
    ad::Tensor<T> s(1, in.cols());
    std::copy(in.row(0).begin(), in.row(0).end(), s.row(0).begin());
    const auto l = compute_losses<T>(out, window_matrix<T>(w), s, unit, LossWeights{});
    sem += l.sem;
    pos += l.pos;
    rot += l.rot;
  }
  const double n = static_cast<double>(batch.size());
  constexpr double kFloor = 1e-8;
  return {std::max(sem / n, kFloor), std::max(pos / n, kFloor), std::max(rot / n, kFloor)};
}

NonFiniteLoss::NonFiniteLoss(std::int64_t s, std::optional<std::filesystem::path> lg)
    : Error("non-finite loss at step " + std::to_string(s) +
            (lg ? "; last good checkpoint: " + lg->string() : std::string("; no checkpoint written"))),
      step(s),
      last_good(std::move(lg)) {}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,L_sem,L_pos,L_rot,L_total\n" << std::setprecision(9);
  for (const auto& r : trace) {
    out << r.step << ',' << r.loss.sem << ',' << r.loss.pos << ',' << r.loss.rot << ','
        << r.loss.total << '\n';
  }
}

namespace {

std::vector<data::MotionWindow> build_pool(const TrainInputs& in, const TrainConfig& cfg) {
  std::vector<data::MotionWindow> pool = in.windows;
  if (!cfg.augment) return pool;
  for (std::size_t i = 0; i < in.windows.size(); ++i) {
    grp::GrpConfig g = cfg.grp;
    g.seed = derive_seed(cfg.seed ^ 0x6a09e667f3bcc908ull, i);
    auto res = grp::apply_augmentation(in.windows[i], in.labels, g);
    for (auto& w : res.windows) pool.push_back(std::move(w));
  }
  return pool;
}

}  // namespace

TrainResult train(const TrainInputs& inputs, const model::CmibConfig& model_cfg,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  model_cfg.validate();
  if (inputs.windows.empty()) throw InvalidArgument("train: no training windows");
  for (const auto& w : inputs.windows) {
    if (w.joints != model_cfg.joints) {
      throw InvalidArgument("train: window '" + w.source + "' has " + std::to_string(w.joints) +
                            " joints, model expects " + std::to_string(model_cfg.joints));
    }
    if (w.length < 3 || w.length > model_cfg.t_max) {
      throw InvalidArgument("train: window '" + w.source + "' length " + std::to_string(w.length) +
                            " outside [3, t_max]");
    }
    if (w.label >= model_cfg.n_labels) {
      throw InvalidArgument("train: window label " + std::to_string(w.label) +
                            " exceeds n_labels");
    }
  }

  model::CmibModel<float> m = hooks.resume ? model::model_from_checkpoint<float>(*hooks.resume)
                                           : model::CmibModel<float>(model_cfg, cfg.seed);
  std::optional<model::LossScales> scales;
  std::int64_t step0 = 0;
  if (hooks.resume) {
    scales = hooks.resume->meta.scales;
    step0 = hooks.resume->meta.step;
  }

  const auto pool = build_pool(inputs, cfg);
  ad::AdamW<float> opt(cfg.optimizer);
  Rng rng(derive_seed(cfg.seed, 1));
  auto params = m.parameters();

  if (hooks.run_dir) {
    std::filesystem::create_directories(*hooks.run_dir);
    nlohmann::json resolved = {{"model", model::to_json(model_cfg)},
                               {"train", to_json(cfg)},
                               {"windows", inputs.windows.size()},
                               {"pool", pool.size()}};
    write_file_text(*hooks.run_dir / "config.json", resolved.dump(2) + "\n");
  }

  TrainResult result;
  result.pool_size = pool.size();
  std::optional<std::filesystem::path> last_good;
  auto snapshot = [&](std::int64_t step) {
    return model::make_checkpoint(m, {step, cfg.seed, *scales}, inputs.labels, inputs.skeleton,
                                  inputs.stats);
  };

  const float inv_b = 1.0f / static_cast<float>(cfg.batch_size);
  for (std::int64_t step = step0 + 1; step <= step0 + cfg.steps; ++step) {
    std::vector<BatchItem> batch(cfg.batch_size);
    for (auto& item : batch) {
      item.window = &pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
      item.keys = sample_key_set(static_cast<geom::FrameIndex>(item.window->length),
                                 cfg.anchor_probability, rng, model_cfg.context_frames);
    }
    if (!scales) scales = calibrate_loss_scales(m, batch);

    ad::Graph<float> g(derive_seed(cfg.seed, static_cast<std::uint64_t>(step) + 2));
    m.zero_grad();
    const auto b = m.bind(g, true);
    std::optional<ad::Graph<float>::Var> acc;
    LossValues sum;
    for (const auto& item : batch) {
      const auto& w = *item.window;
      const auto interp = model::CmibModel<float>::interpolated_rows(
          key_poses(w, item.keys), static_cast<geom::FrameIndex>(w.length));
      const auto x = m.input(g, b, interp, w.label);
      const auto out = m.encode(g, b, x, ad::Mode::kTrain);
      const std::size_t id[] = {w.label};
      const auto lv = compute_losses(g, out, window_matrix<float>(w), g.embedding_lookup(b.sem, id),
                                     *scales, cfg.weights);
      sum.sem += g.value(lv.sem)[0];
      sum.pos += g.value(lv.pos)[0];
      sum.rot += g.value(lv.rot)[0];
      acc = acc ? g.add(*acc, lv.total) : lv.total;
    }
    const auto loss = g.scale(*acc, inv_b);
    LossRow row{step,
                {sum.sem * inv_b, sum.pos * inv_b, sum.rot * inv_b,
                 static_cast<double>(g.value(loss)[0])}};
    if (!std::isfinite(row.loss.total)) throw NonFiniteLoss(step, last_good);

    g.backward(loss);
    if (cfg.clip_norm > 0) ad::clip_grad_norm(params, cfg.clip_norm);
    opt.step(params);
    result.trace.push_back(row);
    if (hooks.on_step) hooks.on_step(row);

    if (hooks.run_dir && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(7) << std::setfill('0') << step << ".cmib";
      const auto path = *hooks.run_dir / name.str();
      model::save_checkpoint(path, snapshot(step));
      last_good = path;
    }
  }
  if (!scales) scales = model::LossScales{};

  result.checkpoint = snapshot(step0 + cfg.steps);
  if (hooks.run_dir) {
    model::save_checkpoint(*hooks.run_dir / "model.cmib", result.checkpoint);
    write_loss_csv(*hooks.run_dir / "loss.csv", result.trace);
  }
  return result;
}

template LossVars<float> compute_losses<float>(ad::Graph<float>&, ad::Graph<float>::Var,
                                               const ad::Tensor<float>&, ad::Graph<float>::Var,
                                               const model::LossScales&, const LossWeights&);
template LossVars<double> compute_losses<double>(ad::Graph<double>&, ad::Graph<double>::Var,
                                                 const ad::Tensor<double>&, ad::Graph<double>::Var,
                                                 const model::LossScales&, const LossWeights&);
template LossValues compute_losses<float>(const ad::Tensor<float>&, const ad::Tensor<float>&,
                                          const ad::Tensor<float>&, const model::LossScales&,
                                          const LossWeights&);
template LossValues compute_losses<double>(const ad::Tensor<double>&, const ad::Tensor<double>&,
                                           const ad::Tensor<double>&, const model::LossScales&,
                                           const LossWeights&);
template ad::Tensor<float> window_matrix<float>(const data::MotionWindow&);
template ad::Tensor<double> window_matrix<double>(const data::MotionWindow&);
template model::LossScales calibrate_loss_scales<float>(const model::CmibModel<float>&,
                                                        const std::vector<BatchItem>&);
template model::LossScales calibrate_loss_scales<double>(const model::CmibModel<double>&,
                                                         const std::vector<BatchItem>&);

}  // namespace cmib::train

#include "cmib/model/model.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "cmib/data/window.hpp"
#include "cmib/geom/interpolation.hpp"
#include "cmib/geom/links.hpp"
#include "cmib/util/rng.hpp"

namespace cmib::model {

void CmibConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("model config: " + msg); };
  if (joints == 0) fail("joints must be >= 1");
  if (heads == 0) fail("heads must be >= 1");
  if (d() % heads != 0) {
    fail("d = 7*joints = " + std::to_string(d()) + " is not divisible by heads = " +
         std::to_string(heads));
  }
  if (t_max < 2) fail("t_max must be >= 2");
  if (layers == 0) fail("layers must be >= 1");
  if (d_ff == 0) fail("d_ff must be >= 1");
  if (n_labels == 0) fail("n_labels must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (context_frames == 0 || context_frames >= t_max) fail("context_frames must be in [1, t_max)");
}

nlohmann::json to_json(const CmibConfig& c) {
  return {{"joints", c.joints},   {"t_max", c.t_max},
          {"heads", c.heads},     {"layers", c.layers},
          {"d_ff", c.d_ff},       {"dropout", c.dropout},
          {"n_labels", c.n_labels}, {"context_frames", c.context_frames},
          {"gelu", c.gelu == ad::GeluVariant::kTanh ? "tanh" : "erf"}};
}

CmibConfig config_from_json(const nlohmann::json& j) {
  CmibConfig c;
  c.joints = j.at("joints").get<std::uint32_t>();
  c.t_max = j.at("t_max").get<std::uint32_t>();
  c.heads = j.at("heads").get<std::uint32_t>();
  c.layers = j.at("layers").get<std::uint32_t>();
  c.d_ff = j.at("d_ff").get<std::uint32_t>();
  c.dropout = j.at("dropout").get<double>();
  c.n_labels = j.at("n_labels").get<std::uint32_t>();
  c.context_frames = j.value("context_frames", 1u);
  const std::string gelu = j.value("gelu", std::string("tanh"));
  if (gelu != "tanh" && gelu != "erf") throw InvalidArgument("model config: unknown gelu '" + gelu + "'");
  c.gelu = gelu == "tanh" ? ad::GeluVariant::kTanh : ad::GeluVariant::kErf;
  c.validate();
  return c;
}

namespace {

template <class T>
ad::Parameter<T> uniform_param(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(rows));
  ad::Tensor<T> v(rows, cols);
  for (auto& x : v.values()) x = static_cast<T>(rng.uniform(-a, a));
  return {std::move(name), std::move(v)};
}

template <class T>
ad::Parameter<T> normal_param(std::string name, std::size_t rows, std::size_t cols, Rng& rng) {
  ad::Tensor<T> v(rows, cols);
  for (auto& x : v.values()) x = static_cast<T>(rng.normal(0.0, 0.02));
  return {std::move(name), std::move(v)};
}

template <class T>
ad::Parameter<T> const_param(std::string name, std::size_t cols, T value) {
  return {std::move(name), ad::Tensor<T>(1, cols, value)};
}

}  // namespace

template <class T>
CmibModel<T>::CmibModel(CmibConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t d = cfg_.d(), dk = cfg_.d_k();
  pe_ = normal_param<T>("pe", cfg_.t_max, d, rng);
  sem_ = normal_param<T>("sem", cfg_.n_labels, d, rng);
  layers_.resize(cfg_.layers);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& L = layers_[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      L.wq.push_back(uniform_param<T>(p + "wq" + std::to_string(h), d, dk, rng));
    }
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      L.wk.push_back(uniform_param<T>(p + "wk" + std::to_string(h), d, dk, rng));
    }
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      L.wv.push_back(uniform_param<T>(p + "wv" + std::to_string(h), d, dk, rng));
    }
    L.wo = uniform_param<T>(p + "wo", d, d, rng);
    L.ln1_gain = const_param<T>(p + "ln1.gain", d, T(1));
    L.ln1_bias = const_param<T>(p + "ln1.bias", d, T(0));
    L.w1 = uniform_param<T>(p + "w1", d, cfg_.d_ff, rng);
    L.b1 = const_param<T>(p + "b1", cfg_.d_ff, T(0));
    L.w2 = uniform_param<T>(p + "w2", cfg_.d_ff, d, rng);
    L.b2 = const_param<T>(p + "b2", d, T(0));
    L.ln2_gain = const_param<T>(p + "ln2.gain", d, T(1));
    L.ln2_bias = const_param<T>(p + "ln2.bias", d, T(0));
  }
}

template <class T>
std::vector<ad::Parameter<T>*> CmibModel<T>::parameters() {
  std::vector<ad::Parameter<T>*> out{&pe_, &sem_};
  for (auto& L : layers_) {
    for (auto& w : L.wq) out.push_back(&w);
    for (auto& w : L.wk) out.push_back(&w);
    for (auto& w : L.wv) out.push_back(&w);
    for (auto* p : {&L.wo, &L.ln1_gain, &L.ln1_bias, &L.w1, &L.b1, &L.w2, &L.b2, &L.ln2_gain,
                    &L.ln2_bias}) {
      out.push_back(p);
    }
  }
  return out;
}

template <class T>
std::vector<const ad::Parameter<T>*> CmibModel<T>::parameters() const {
  auto mut = const_cast<CmibModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <class T>
std::size_t CmibModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

template <class T>
void CmibModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <class T>
void CmibModel<T>::check_input(geom::FrameIndex T_, std::uint32_t label) const {
  if (T_ < 2 || static_cast<std::uint32_t>(T_) > cfg_.t_max) {
    throw InvalidArgument("sequence length T = " + std::to_string(T_) + " outside [2, t_max = " +
                          std::to_string(cfg_.t_max) + "]");
  }
  if (label >= cfg_.n_labels) {
    throw InvalidArgument("label id " + std::to_string(label) + " unknown (model has " +
                          std::to_string(cfg_.n_labels) + " labels)");
  }
}

template <class T>
ad::Tensor<T> CmibModel<T>::interpolated_rows(const geom::KeyFrames& keys, geom::FrameIndex T_) {
  const auto seq = geom::interpolate_missing(keys, T_);
  const std::size_t J = seq.joint_count();
  ad::Tensor<T> out(seq.length(), data::pose_dim(J));
  for (std::size_t t = 0; t < seq.length(); ++t) data::vectorize<T>(seq.frames[t], out.row(t));
  return out;
}

template <class T>
ad::Tensor<T> CmibModel<T>::build_input(const geom::KeyFrames& keys, geom::FrameIndex T_,
                                        std::uint32_t label) const {
  check_input(T_, label);
  const auto x = interpolated_rows(keys, T_);
  if (x.cols() != cfg_.d()) {
    throw ShapeError("key poses have " + std::to_string(x.cols() / 7) + " joints, model expects " +
                     std::to_string(cfg_.joints));
  }
  ad::Tensor<T> out(x.rows() + 1, x.cols());
  std::copy(sem_.value.row(label).begin(), sem_.value.row(label).end(), out.row(0).begin());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(t + 1, c) = x(t, c) + pe_.value(t, c);
  }
  return out;
}

template <class T>
typename CmibModel<T>::Bound CmibModel<T>::bind(Graph& g, bool trainable) {
  if (!trainable) return std::as_const(*this).bind(g);
  Bound b;
  b.pe = g.param(pe_);
  b.sem = g.param(sem_);
  for (auto& L : layers_) {
    typename Bound::Layer bl;
    for (auto& w : L.wq) bl.wq.push_back(g.param(w));
    for (auto& w : L.wk) bl.wk.push_back(g.param(w));
    for (auto& w : L.wv) bl.wv.push_back(g.param(w));
    bl.wo = g.param(L.wo);
    bl.ln1_gain = g.param(L.ln1_gain);
    bl.ln1_bias = g.param(L.ln1_bias);
    bl.w1 = g.param(L.w1);
    bl.b1 = g.param(L.b1);
    bl.w2 = g.param(L.w2);
    bl.b2 = g.param(L.b2);
    bl.ln2_gain = g.param(L.ln2_gain);
    bl.ln2_bias = g.param(L.ln2_bias);
    b.layers.push_back(std::move(bl));
  }
  return b;
}

template <class T>
typename CmibModel<T>::Bound CmibModel<T>::bind(Graph& g) const {
  Bound b;
  b.pe = g.constant(pe_.value);
  b.sem = g.constant(sem_.value);
  for (const auto& L : layers_) {
    typename Bound::Layer bl;
    for (const auto& w : L.wq) bl.wq.push_back(g.constant(w.value));
    for (const auto& w : L.wk) bl.wk.push_back(g.constant(w.value));
    for (const auto& w : L.wv) bl.wv.push_back(g.constant(w.value));
    bl.wo = g.constant(L.wo.value);
    bl.ln1_gain = g.constant(L.ln1_gain.value);
    bl.ln1_bias = g.constant(L.ln1_bias.value);
    bl.w1 = g.constant(L.w1.value);
    bl.b1 = g.constant(L.b1.value);
    bl.w2 = g.constant(L.w2.value);
    bl.b2 = g.constant(L.b2.value);
    bl.ln2_gain = g.constant(L.ln2_gain.value);
    bl.ln2_bias = g.constant(L.ln2_bias.value);
    b.layers.push_back(std::move(bl));
  }
  return b;
}

template <class T>
typename CmibModel<T>::Var CmibModel<T>::input(Graph& g, const Bound& b,
                                               const ad::Tensor<T>& interp,
                                               std::uint32_t label) const {
  check_input(static_cast<geom::FrameIndex>(interp.rows()), label);
  if (interp.cols() != cfg_.d()) {
    throw ShapeError("input rows have width " + std::to_string(interp.cols()) + ", model d = " +
                     std::to_string(cfg_.d()));
  }
  const std::size_t ids[] = {label};
  const Var s = g.embedding_lookup(b.sem, ids);
  const Var x = g.add(g.constant(interp), g.slice_rows(b.pe, 0, interp.rows()));
  const Var parts[] = {s, x};
  return g.concat_rows(parts);
}

template <class T>
typename CmibModel<T>::Var CmibModel<T>::encode(Graph& g, const Bound& b, Var x, ad::Mode mode,
                                                std::vector<Var>* attention) const {
  const auto& s = g.shape(x);
  if (s.cols != cfg_.d() || s.rows > cfg_.t_max + 1) {
    throw ShapeError("encoder input " + s.str() + " does not fit config (d = " +
                     std::to_string(cfg_.d()) + ", at most " + std::to_string(cfg_.t_max + 1) +
                     " rows)");
  }
  const T keep = static_cast<T>(1.0 - cfg_.dropout);
  const T inv_sqrt_dk = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg_.d_k())));
  for (const auto& L : b.layers) {
    std::vector<Var> heads;
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      const Var q = g.matmul(x, L.wq[h]);
      const Var k = g.matmul(x, L.wk[h]);
      const Var v = g.matmul(x, L.wv[h]);
      const Var a = g.softmax_lastdim(g.scale(g.matmul_nt(q, k), inv_sqrt_dk));
      if (attention) attention->push_back(a);
      heads.push_back(g.matmul(a, v));
    }
    Var att = g.matmul(g.concat_cols(heads), L.wo);
    att = g.dropout(att, keep, mode);
    x = g.layer_norm(g.add(x, att), L.ln1_gain, L.ln1_bias);
    Var ff = g.gelu(g.add(g.matmul(x, L.w1), L.b1), cfg_.gelu);
    ff = g.add(g.matmul(ff, L.w2), L.b2);
    ff = g.dropout(ff, keep, mode);
    x = g.layer_norm(g.add(x, ff), L.ln2_gain, L.ln2_bias);
  }
  return x;
}

template <class T>
ad::Tensor<T> CmibModel<T>::forward(const ad::Tensor<T>& in) const {
  Graph g;
  const Bound b = bind(g);
  const Var out = encode(g, b, g.constant(in), ad::Mode::kEval);
  return g.value(out);
}

template <class T>
geom::MotionSequence CmibModel<T>::infill(const geom::KeyFrames& keys, geom::FrameIndex T_,
                                          std::uint32_t label,
                                          const geom::Skeleton& skeleton) const {
  if (skeleton.joint_count() != cfg_.joints) {
    throw InvalidArgument("skeleton has " + std::to_string(skeleton.joint_count()) +
                          " joints, model expects " + std::to_string(cfg_.joints));
  }
  const auto out = forward(build_input(keys, T_, label));
  geom::MotionSequence seq;
  seq.frames.reserve(static_cast<std::size_t>(T_));
  for (std::size_t t = 1; t < out.rows(); ++t) {
    geom::Pose p = data::devectorize<T>(out.row(t), cfg_.joints);
    for (std::size_t j = 0; j < p.rotations.size(); ++j) {
      const double n = p.rotations[j].norm();
      if (!(n > 1e-12) || !std::isfinite(n)) {
        throw Error("predicted quaternion for joint " + std::to_string(j) + " at frame " +
                    std::to_string(t) + " has zero or non-finite norm");
      }
      p.rotations[j] = p.rotations[j].normalized();
    }
    seq.frames.push_back(geom::rescale_links(p, skeleton));
  }
  return seq;
}

template <class T>
geom::MotionSequence CmibModel<T>::infill(
    const geom::Pose& start, const geom::Pose& target,
    const std::optional<std::pair<geom::FrameIndex, geom::Pose>>& anchor, std::uint32_t label,
    geom::FrameIndex T_, const geom::Skeleton& skeleton) const {
  geom::KeyFrames keys{{1, start}, {T_, target}};
  if (anchor) {
    if (anchor->first <= 1 || anchor->first >= T_) {
      throw InvalidArgument("anchor frame " + std::to_string(anchor->first) +
                            " must satisfy 1 < k < T = " + std::to_string(T_));
    }
    keys[anchor->first] = anchor->second;
  }
  return infill(keys, T_, label, skeleton);
}

template class CmibModel<float>;
template class CmibModel<double>;

}  // namespace cmib::model

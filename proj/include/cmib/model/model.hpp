#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cmib/autodiff/graph.hpp"
#include "cmib/geom/pose.hpp"

namespace cmib::model {

struct CmibConfig {
  std::uint32_t joints = 22;
  std::uint32_t t_max = 65;
  std::uint32_t heads = 7;
  std::uint32_t layers = 8;
  std::uint32_t d_ff = 2048;
  double dropout = 0.05;
  std::uint32_t n_labels = 1;
  // Leading frames given as keys at inference (keys = {1..c, T}).
  std::uint32_t context_frames = 1;
  ad::GeluVariant gelu = ad::GeluVariant::kTanh;

  std::uint32_t d() const { return 7 * joints; }
  std::uint32_t d_k() const { return d() / heads; }
  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const CmibConfig& c);
CmibConfig config_from_json(const nlohmann::json& j);

template <class T>
struct LayerParams {
  std::vector<ad::Parameter<T>> wq, wk, wv;  // per head, d x d_k
  ad::Parameter<T> wo;                       // d x d
  ad::Parameter<T> ln1_gain, ln1_bias;       // 1 x d
  ad::Parameter<T> w1, b1;                   // d x d_ff, 1 x d_ff
  ad::Parameter<T> w2, b2;                   // d_ff x d, 1 x d
  ad::Parameter<T> ln2_gain, ln2_bias;
};

/// Encoder over [semantic token; interpolated frames + positional embedding].
///
/// Post-norm blocks: unmasked multi-head attention, residual, layer norm,
/// GeLU feed-forward, residual, layer norm. The output has the input's shape
/// and its rows 2..T+1 are read back as poses.
template <class T>
class CmibModel {
 public:
  using Graph = ad::Graph<T>;
  using Var = typename Graph::Var;

  // Attention/FFN weights ~ U(+-1/sqrt(fan_in)), biases 0, layer-norm gain 1;
  // positional and semantic tables ~ N(0, 0.02^2).
  CmibModel(CmibConfig cfg, std::uint64_t seed);

  const CmibConfig& config() const { return cfg_; }

  // Canonical parameter order (also the checkpoint order): pe, sem, then per
  // layer wq[0..m), wk[0..m), wv[0..m), wo, ln1, w1, b1, w2, b2, ln2.
  std::vector<ad::Parameter<T>*> parameters();
  std::vector<const ad::Parameter<T>*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  // (T+1) x d input: row 0 is sem[label], row t is the interpolated frame t
  // plus pe[t-1].
  ad::Tensor<T> build_input(const geom::KeyFrames& keys, geom::FrameIndex length,
                            std::uint32_t label) const;
  // Interpolated frames as a T x d matrix (no embeddings).
  static ad::Tensor<T> interpolated_rows(const geom::KeyFrames& keys, geom::FrameIndex length);

  // Parameters as graph leaves; trainable leaves accumulate into the
  // parameters' gradients, otherwise they are constants.
  struct Bound {
    Var pe, sem;
    struct Layer {
      std::vector<Var> wq, wk, wv;
      Var wo, ln1_gain, ln1_bias, w1, b1, w2, b2, ln2_gain, ln2_bias;
    };
    std::vector<Layer> layers;
  };
  Bound bind(Graph& g, bool trainable);
  Bound bind(Graph& g) const;

  // Same as build_input but differentiable w.r.t. pe and sem.
  Var input(Graph& g, const Bound& b, const ad::Tensor<T>& interp, std::uint32_t label) const;
  // Runs the encoder stack; attention matrices are appended to `attention`
  // (layer-major, head-minor) when given.
  Var encode(Graph& g, const Bound& b, Var x, ad::Mode mode,
             std::vector<Var>* attention = nullptr) const;

  // Eval-mode forward of a prepared input matrix.
  ad::Tensor<T> forward(const ad::Tensor<T>& input) const;

  // Eval-mode infill from arbitrary keys (must include 1 and T). Output
  // quaternions are normalized and bones restored to reference length.
  geom::MotionSequence infill(const geom::KeyFrames& keys, geom::FrameIndex length,
                              std::uint32_t label, const geom::Skeleton& skeleton) const;
  geom::MotionSequence infill(const geom::Pose& start, const geom::Pose& target,
                              const std::optional<std::pair<geom::FrameIndex, geom::Pose>>& anchor,
                              std::uint32_t label, geom::FrameIndex length,
                              const geom::Skeleton& skeleton) const;

 private:
  void check_input(geom::FrameIndex length, std::uint32_t label) const;

  CmibConfig cfg_;
  ad::Parameter<T> pe_;
  ad::Parameter<T> sem_;
  std::vector<LayerParams<T>> layers_;
};

extern template class CmibModel<float>;
extern template class CmibModel<double>;

}  // namespace cmib::model

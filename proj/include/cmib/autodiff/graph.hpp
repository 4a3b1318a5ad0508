#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cmib/autodiff/tensor.hpp"
#include "cmib/util/rng.hpp"

namespace cmib::ad {

enum class Mode { kTrain, kEval };
enum class GeluVariant { kTanh, kErf };

/// Tape for reverse-mode differentiation over rank-2 tensors.
///
/// Nodes are recorded in creation order, which is a topological order;
/// backward() walks it once in reverse. Leaves created with param() push
/// their gradients into the owning Parameter (accumulating), so callers
/// zero parameter gradients between steps. A graph is used for a single
/// forward/backward pass and then discarded.
template <class T>
class Graph {
 public:
  struct Var {
    std::size_t id = 0;
  };

  explicit Graph(std::uint64_t seed = 0) : rng_(seed) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor<T> value);
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() root with respect to v (zeros if v did
  // not influence it).
  const Tensor<T>& grad(Var v) const;
  const Shape& shape(Var v) const { return nodes_[v.id].value.shape(); }
  std::size_t node_count() const { return nodes_.size(); }

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  // Elementwise sum; b may also be a 1 x cols row broadcast over a's rows.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);  // same shapes
  Var scale(Var a, T s);
  Var transpose(Var a);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  // Rows of `table` selected by ids, in order.
  Var embedding_lookup(Var table, std::span<const std::size_t> ids);
  Var gelu(Var a, GeluVariant variant = GeluVariant::kTanh);
  // Max-subtracted softmax over each row.
  Var softmax_lastdim(Var a);
  // Per-row normalization over the last dimension, then gain/bias (1 x cols).
  Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-5));
  // Inverted dropout: kept entries are scaled by 1/keep_prob. Identity in eval mode.
  Var dropout(Var a, T keep_prob, Mode mode);
  // Mean absolute difference, 1 x 1.
  Var l1_loss(Var a, Var b);
  Var sum(Var a);  // 1 x 1

  // Throws ShapeError unless `loss` is 1 x 1.
  void backward(Var loss);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily during backward
    Parameter<T>* param = nullptr;
    std::function<void()> back;
  };

  Var push(Tensor<T> value, std::function<void()> back = {});
  Tensor<T>& grad_buf(std::size_t id);

  std::vector<Node> nodes_;
  Rng rng_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace cmib::ad

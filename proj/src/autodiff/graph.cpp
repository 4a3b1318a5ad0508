#include "cmib/autodiff/graph.hpp"

#include <cmath>
#include <numbers>

#include "cmib/simd/kernels.hpp"

namespace cmib::ad {
namespace {

void require(bool ok, const char* op, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

template <class T>
void add_into(Tensor<T>& dst, const Tensor<T>& src, T alpha = T(1)) {
  simd::kernels<T>().axpy(dst.size(), alpha, src.data(), dst.data());
}

}  // namespace

template <class T>
typename Graph<T>::Var Graph<T>::push(Tensor<T> value, std::function<void()> back) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, std::move(back)});
  return Var{nodes_.size() - 1};
}

template <class T>
Tensor<T>& Graph<T>::grad_buf(std::size_t id) {
  return nodes_[id].grad;
}

template <class T>
const Tensor<T>& Graph<T>::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.shape() != n.value.shape()) throw Error("gradient requested before backward()");
  return n.grad;
}

template <class T>
typename Graph<T>::Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value));
}

template <class T>
typename Graph<T>::Var Graph<T>::param(Parameter<T>& p) {
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor<T>(p.value.rows(), p.value.cols());
  const Var v = push(p.value);
  nodes_[v.id].param = &p;
  const std::size_t id = v.id;
  nodes_[id].back = [this, id] { add_into(nodes_[id].param->grad, nodes_[id].grad); };
  return v;
}

template <class T>
typename Graph<T>::Var Graph<T>::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.cols() == B.rows(), "matmul", A.shape(), B.shape());
  const std::size_t M = A.rows(), K = A.cols(), N = B.cols();
  Tensor<T> out(M, N);
  simd::kernels<T>().gemm_nn(M, N, K, A.data(), B.data(), out.data(), false);
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, b, self, M, N, K] {
    const auto& g = nodes_[self].grad;
    const auto& k = simd::kernels<T>();
    k.gemm_nt(M, K, N, g.data(), value(b).data(), grad_buf(a.id).data(), true);
    k.gemm_tn(K, N, M, value(a).data(), g.data(), grad_buf(b.id).data(), true);
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::matmul_nt(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.cols() == B.cols(), "matmul_nt", A.shape(), B.shape());
  const std::size_t M = A.rows(), K = A.cols(), N = B.rows();
  Tensor<T> out(M, N);
  simd::kernels<T>().gemm_nt(M, N, K, A.data(), B.data(), out.data(), false);
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, b, self, M, N, K] {
    const auto& g = nodes_[self].grad;
    const auto& k = simd::kernels<T>();
    k.gemm_nn(M, K, N, g.data(), value(b).data(), grad_buf(a.id).data(), true);
    k.gemm_tn(N, K, M, g.data(), value(a).data(), grad_buf(b.id).data(), true);
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::add(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  const bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
  require(A.shape() == B.shape() || broadcast, "add", A.shape(), B.shape());
  Tensor<T> out = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const T* src = broadcast ? B.data() : B.data() + r * A.cols();
    simd::kernels<T>().axpy(A.cols(), T(1), src, out.data() + r * A.cols());
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, b, self, broadcast] {
    const auto& g = nodes_[self].grad;
    add_into(grad_buf(a.id), g);
    auto& gb = grad_buf(b.id);
    if (!broadcast) {
      add_into(gb, g);
      return;
    }
    for (std::size_t r = 0; r < g.rows(); ++r) {
      simd::kernels<T>().axpy(g.cols(), T(1), g.data() + r * g.cols(), gb.data());
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::sub(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.shape() == B.shape(), "sub", A.shape(), B.shape());
  Tensor<T> out = A;
  add_into(out, B, T(-1));
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, b, self] {
    const auto& g = nodes_[self].grad;
    add_into(grad_buf(a.id), g);
    add_into(grad_buf(b.id), g, T(-1));
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::scale(Var a, T s) {
  Tensor<T> out = value(a);
  for (auto& v : out.values()) v *= s;
  const std::size_t self = nodes_.size();
  return push(std::move(out),
              [this, a, s, self] { add_into(grad_buf(a.id), nodes_[self].grad, s); });
}

template <class T>
typename Graph<T>::Var Graph<T>::transpose(Var a) {
  const auto& A = value(a);
  Tensor<T> out(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < A.cols(); ++c) out(c, r) = A(r, c);
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, self] {
    const auto& g = nodes_[self].grad;
    auto& ga = grad_buf(a.id);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(c, r);
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows", value(parts[0]).shape(), value(p).shape());
    rows += value(p).rows();
  }
  Tensor<T> out(rows, cols);
  std::size_t at = 0;
  for (Var p : parts) {
    const auto& v = value(p);
    std::copy(v.values().begin(), v.values().end(), out.data() + at * cols);
    at += v.rows();
  }
  const std::size_t self = nodes_.size();
  std::vector<Var> ins(parts.begin(), parts.end());
  return push(std::move(out), [this, ins, self, cols] {
    const auto& g = nodes_[self].grad;
    std::size_t at = 0;
    for (Var p : ins) {
      auto& gp = grad_buf(p.id);
      simd::kernels<T>().axpy(gp.size(), T(1), g.data() + at * cols, gp.data());
      at += gp.rows();
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    require(value(p).rows() == rows, "concat_cols", value(parts[0]).shape(), value(p).shape());
    cols += value(p).cols();
  }
  Tensor<T> out(rows, cols);
  std::size_t at = 0;
  for (Var p : parts) {
    const auto& v = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(v.row(r).begin(), v.row(r).end(), out.data() + r * cols + at);
    }
    at += v.cols();
  }
  const std::size_t self = nodes_.size();
  std::vector<Var> ins(parts.begin(), parts.end());
  return push(std::move(out), [this, ins, self, rows, cols] {
    const auto& g = nodes_[self].grad;
    std::size_t at = 0;
    for (Var p : ins) {
      auto& gp = grad_buf(p.id);
      for (std::size_t r = 0; r < rows; ++r) {
        simd::kernels<T>().axpy(gp.cols(), T(1), g.data() + r * cols + at,
                                gp.data() + r * gp.cols());
      }
      at += gp.cols();
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const auto& A = value(a);
  if (begin + count > A.rows() || count == 0) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + A.shape().str());
  }
  Tensor<T> out(count, A.cols(),
                std::vector<T>(A.data() + begin * A.cols(),
                               A.data() + (begin + count) * A.cols()));
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, begin, self] {
    const auto& g = nodes_[self].grad;
    auto& ga = grad_buf(a.id);
    simd::kernels<T>().axpy(g.size(), T(1), g.data(), ga.data() + begin * ga.cols());
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const auto& A = value(a);
  if (begin + count > A.cols() || count == 0) {
    throw ShapeError("slice_cols: cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + A.shape().str());
  }
  Tensor<T> out(A.rows(), count);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = A(r, begin + c);
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, begin, count, self] {
    const auto& g = nodes_[self].grad;
    auto& ga = grad_buf(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < count; ++c) ga(r, begin + c) += g(r, c);
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::embedding_lookup(Var table, std::span<const std::size_t> ids) {
  const auto& W = value(table);
  Tensor<T> out(ids.size(), W.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= W.rows()) {
      throw ShapeError("embedding_lookup: id " + std::to_string(ids[r]) + " out of table " +
                       W.shape().str());
    }
    std::copy(W.row(ids[r]).begin(), W.row(ids[r]).end(), out.row(r).begin());
  }
  const std::size_t self = nodes_.size();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return push(std::move(out), [this, table, idx, self] {
    const auto& g = nodes_[self].grad;
    auto& gw = grad_buf(table.id);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      simd::kernels<T>().axpy(g.cols(), T(1), g.data() + r * g.cols(),
                              gw.data() + idx[r] * gw.cols());
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::gelu(Var a, GeluVariant variant) {
  const auto& A = value(a);
  Tensor<T> out(A.rows(), A.cols());
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T k = T(0.044715);
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < A.size(); ++i) {
    const T x = A[i];
    out[i] = variant == GeluVariant::kTanh ? T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x)))
                                           : T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, self, variant, c, k, inv_sqrt2] {
    const auto& g = nodes_[self].grad;
    const auto& x = value(a);
    auto& ga = grad_buf(a.id);
    const T inv_sqrt_2pi = static_cast<T>(1.0 / std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T v = x[i];
      T d;
      if (variant == GeluVariant::kTanh) {
        const T th = std::tanh(c * (v + k * v * v * v));
        d = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * c * (T(1) + T(3) * k * v * v);
      } else {
        d = T(0.5) * (T(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      }
      ga[i] += g[i] * d;
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::softmax_lastdim(Var a) {
  const auto& A = value(a);
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const auto in = A.row(r);
    auto o = out.row(r);
    const T m = *std::max_element(in.begin(), in.end());
    T s = T(0);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - m);
      s += o[c];
    }
    for (auto& v : o) v /= s;
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, self] {
    const auto& g = nodes_[self].grad;
    const auto& y = nodes_[self].value;
    auto& ga = grad_buf(a.id);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const T d = simd::kernels<T>().dot(y.cols(), g.row(r).data(), y.row(r).data());
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - d);
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  const auto& X = value(x);
  const auto& G = value(gain);
  const auto& B = value(bias);
  require(G.rows() == 1 && G.cols() == X.cols(), "layer_norm gain", X.shape(), G.shape());
  require(B.rows() == 1 && B.cols() == X.cols(), "layer_norm bias", X.shape(), B.shape());
  const std::size_t n = X.cols();
  Tensor<T> xhat(X.rows(), n);
  std::vector<T> rstd(X.rows());
  Tensor<T> out(X.rows(), n);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto in = X.row(r);
    T mean = T(0);
    for (T v : in) mean += v;
    mean /= static_cast<T>(n);
    T var = T(0);
    for (T v : in) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (in[c] - mean) * rstd[r];
      out(r, c) = xhat(r, c) * G[c] + B[c];
    }
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, x, gain, bias, self, xhat = std::move(xhat),
                               rstd = std::move(rstd), n] {
    const auto& g = nodes_[self].grad;
    const auto& G = value(gain);
    auto& gx = grad_buf(x.id);
    auto& gg = grad_buf(gain.id);
    auto& gb = grad_buf(bias.id);
    std::vector<T> dxhat(n);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      T mean_d = T(0);
      T mean_dx = T(0);
      for (std::size_t c = 0; c < n; ++c) {
        gg[c] += g(r, c) * xhat(r, c);
        gb[c] += g(r, c);
        dxhat[c] = g(r, c) * G[c];
        mean_d += dxhat[c];
        mean_dx += dxhat[c] * xhat(r, c);
      }
      mean_d /= static_cast<T>(n);
      mean_dx /= static_cast<T>(n);
      for (std::size_t c = 0; c < n; ++c) {
        gx(r, c) += rstd[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
      }
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::dropout(Var a, T keep_prob, Mode mode) {
  if (mode == Mode::kEval || keep_prob >= T(1)) return a;
  if (!(keep_prob > T(0))) throw InvalidArgument("dropout keep probability must be in (0, 1]");
  const auto& A = value(a);
  std::vector<T> mask(A.size());
  Tensor<T> out(A.rows(), A.cols());
  const T inv = T(1) / keep_prob;
  for (std::size_t i = 0; i < A.size(); ++i) {
    mask[i] = rng_.uniform() < static_cast<double>(keep_prob) ? inv : T(0);
    out[i] = A[i] * mask[i];
  }
  const std::size_t self = nodes_.size();
  return push(std::move(out), [this, a, self, mask = std::move(mask)] {
    const auto& g = nodes_[self].grad;
    auto& ga = grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::l1_loss(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.shape() == B.shape(), "l1_loss", A.shape(), B.shape());
  T s = T(0);
  for (std::size_t i = 0; i < A.size(); ++i) s += std::abs(A[i] - B[i]);
  const T n = static_cast<T>(A.size());
  const std::size_t self = nodes_.size();
  return push(Tensor<T>(1, 1, s / n), [this, a, b, self, n] {
    const T g = nodes_[self].grad[0] / n;
    const auto& A = value(a);
    const auto& B = value(b);
    auto& ga = grad_buf(a.id);
    auto& gb = grad_buf(b.id);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const T d = A[i] - B[i];
      const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      ga[i] += g * sgn;
      gb[i] -= g * sgn;
    }
  });
}

template <class T>
typename Graph<T>::Var Graph<T>::sum(Var a) {
  T s = T(0);
  for (T v : value(a).values()) s += v;
  const std::size_t self = nodes_.size();
  return push(Tensor<T>(1, 1, s), [this, a, self] {
    const T g = nodes_[self].grad[0];
    for (auto& v : grad_buf(a.id).values()) v += g;
  });
}

template <class T>
void Graph<T>::backward(Var loss) {
  if (value(loss).shape() != Shape{1, 1}) {
    throw ShapeError("backward needs a scalar loss, got " + value(loss).shape().str());
  }
  for (auto& n : nodes_) n.grad = Tensor<T>(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cmib::ad

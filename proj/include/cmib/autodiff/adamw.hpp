#pragma once

#include <cstdint>
#include <vector>

#include "cmib/autodiff/tensor.hpp"

namespace cmib::ad {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: each parameter is first shrunk by
/// (1 - lr * wd), then moved by the bias-corrected moment ratio.
template <class T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // Moments are created on first use and must keep the same parameter list
  // (order and shapes) on every call.
  void step(const std::vector<Parameter<T>*>& params);

  std::int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamWConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
template <class T>
double clip_grad_norm(const std::vector<Parameter<T>*>& params, double max_norm);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace cmib::ad

#include "cmib/autodiff/adamw.hpp"

#include <cmath>

namespace cmib::ad {

template <class T>
void AdamW<T>::step(const std::vector<Parameter<T>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw ShapeError("adamw: expected " + std::to_string(m_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (p.grad.shape() != p.value.shape() || p.value.size() != m_[i].size()) {
      throw ShapeError("adamw: parameter '" + p.name + "' " + p.value.shape().str() +
                       " does not match gradient " + p.grad.shape().str());
    }
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]);
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      double theta = static_cast<double>(p.value[j]);
      if (cfg_.weight_decay != 0.0) theta *= decay;
      theta -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      p.value[j] = static_cast<T>(theta);
    }
  }
}

template <class T>
double clip_grad_norm(const std::vector<Parameter<T>*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) {
    for (T g : p->grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto* p : params) {
      for (T& g : p->grad.values()) g *= s;
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm<float>(const std::vector<Parameter<float>*>&, double);
template double clip_grad_norm<double>(const std::vector<Parameter<double>*>&, double);

}  // namespace cmib::ad

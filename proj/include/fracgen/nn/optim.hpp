#pragma once

#include <cmath>

#include "fracgen/nn/tensor.hpp"

namespace fracgen::nn {

/// Adam with bias correction. Parameters keep their identity across steps;
/// moment buffers live here, keyed by position in the parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, T lr, T beta1 = T(0.5), T beta2 = T(0.9),
       T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].size(), T(0));
      v_[i].assign(params_[i].size(), T(0));
    }
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
      auto& node = *params_[p].node;
      if (node.grad.empty()) continue;  // parameter unused this step
      for (size_t i = 0; i < node.values.size(); ++i) {
        const T g = node.grad[i];
        if (!std::isfinite(static_cast<double>(g)))
          throw NumericError("non-finite gradient in optimizer step");
        m_[p][i] = beta1_ * m_[p][i] + (T(1) - beta1_) * g;
        v_[p][i] = beta2_ * v_[p][i] + (T(1) - beta2_) * g * g;
        const T mhat = m_[p][i] / bc1;
        const T vhat = v_[p][i] / bc2;
        node.values[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  const std::vector<Tensor<T>>& params() const { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  T lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
  for (auto& p : params) p.zero_grad();
}

/// Clamp every parameter value into [-c, c].
template <typename T>
void clip_weights(std::vector<Tensor<T>>& params, T c) {
  for (auto& p : params)
    for (auto& v : p.values()) v = std::clamp(v, -c, c);
}

}  // namespace fracgen::nn

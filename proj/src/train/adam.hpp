#pragma once

#include <cmath>
#include <vector>

#include "nn/module.hpp"

namespace mlfg::train {

// Adam over a fixed parameter list. Slot order matches the parameter order,
// which is what the checkpoint serialization relies on.
template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::Parameter<T>*> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
       T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.push_back(Tensor<T>::zeros(p->var->value.shape));
      v_.push_back(Tensor<T>::zeros(p->var->value.shape));
    }
  }

  void step() {
    ++t_;
    const T c1 = T(1) - std::pow(b1_, static_cast<T>(t_));
    const T c2 = T(1) - std::pow(b2_, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      if (p->var->grad.empty()) continue;  // no gradient reached this step
      T* w = p->var->value.ptr();
      const T* g = p->var->grad.ptr();
      T* m = m_[i].ptr();
      T* v = v_[i].ptr();
      const int64_t n = p->var->value.numel();
      for (int64_t j = 0; j < n; ++j) {
        m[j] = b1_ * m[j] + (T(1) - b1_) * g[j];
        v[j] = b2_ * v[j] + (T(1) - b2_) * g[j] * g[j];
        const T mhat = m[j] / c1;
        const T vhat = v[j] / c2;
        w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int64_t t() const { return t_; }
  void set_t(int64_t t) { t_ = t; }
  size_t slots() const { return params_.size(); }
  Tensor<T>& m_slot(size_t i) { return m_[i]; }
  Tensor<T>& v_slot(size_t i) { return v_[i]; }
  const nn::Parameter<T>* param(size_t i) const { return params_[i]; }

 private:
  std::vector<nn::Parameter<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  T lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
};

}  // namespace mlfg::train

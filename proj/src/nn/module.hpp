#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace mlfg::nn {

enum class InitKind {
  kZeros,
  kOnes,
  kKaimingConv,  // normal, std = sqrt(2 / fan_in)
  kPreluSlope,   // 0.25
};

// One named tensor of a network: trainable parameter or persistent buffer
// (batch-norm running statistics). Archive keys are exactly these names.
template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
  bool trainable = true;
  InitKind init = InitKind::kZeros;
  int fan_in = 0;
};

// Flat, creation-ordered registry. Blocks allocate their parameters here at
// construction time, which fixes both the archive layout and the
// deterministic initialization order.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, std::vector<int> shape, bool trainable,
                    InitKind init, int fan_in = 0) {
    if (by_name_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->var = make_leaf(Tensor<T>::zeros(std::move(shape)), trainable);
    p->trainable = trainable;
    p->init = init;
    p->fan_in = fan_in;
    Parameter<T>* raw = p.get();
    by_name_[name] = raw;
    items_.push_back(std::move(p));
    return *raw;
  }

  const std::vector<std::unique_ptr<Parameter<T>>>& items() const { return items_; }

  Parameter<T>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  std::vector<Parameter<T>*> trainable() const {
    std::vector<Parameter<T>*> out;
    for (auto& p : items_)
      if (p->trainable) out.push_back(p.get());
    return out;
  }

  int64_t trainable_count() const {
    int64_t n = 0;
    for (auto& p : items_)
      if (p->trainable) n += p->var->value.numel();
    return n;
  }

  void init_params(uint64_t seed) {
    Pcg32 rng(child_seed(seed, 0x1717), 0x5bd1);
    for (auto& p : items_) {
      Tensor<T>& v = p->var->value;
      switch (p->init) {
        case InitKind::kZeros:
          v.fill(T(0));
          break;
        case InitKind::kOnes:
          v.fill(T(1));
          break;
        case InitKind::kPreluSlope:
          v.fill(T(0.25));
          break;
        case InitKind::kKaimingConv: {
          const double std = std::sqrt(2.0 / std::max(1, p->fan_in));
          for (auto& e : v.data) e = static_cast<T>(rng.normal() * std);
          break;
        }
      }
    }
  }

  void zero_grads() {
    for (auto& p : items_)
      if (!p->var->grad.empty()) p->var->grad.fill(T(0));
  }

  // Enable/disable gradient accumulation for every trainable entry.
  void set_trainable_grad(bool enabled) {
    for (auto& p : items_)
      if (p->trainable) p->var->requires_grad = enabled;
  }

  bool all_frozen() const {
    for (auto& p : items_)
      if (p->trainable && p->var->requires_grad) return false;
    return true;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
  std::map<std::string, Parameter<T>*> by_name_;
};

}  // namespace mlfg::nn

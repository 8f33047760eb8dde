#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace testutil {

using mlfg::Pcg32;
using mlfg::Tensor;
using mlfg::Var;

inline Tensor<double> random_tensor(std::vector<int> shape, Pcg32& rng, double lo = -1.0,
                                    double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor<float> random_tensor_f(std::vector<int> shape, Pcg32& rng, float lo = -1.0f,
                                     float hi = 1.0f) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Central finite-difference check of d(loss)/d(leaf) at sampled elements.
// `make_loss` rebuilds the graph from the leaves' current values. Returns
// the max relative error over the sampled coordinates.
struct GradCheckResult {
  double max_rel = 0.0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::string worst_at;
};

inline GradCheckResult check_gradients(const std::function<Var<double>()>& make_loss,
                                       const std::vector<Var<double>>& leaves,
                                       int samples_per_leaf, uint64_t seed, double h = 1e-5) {
  // Analytic pass.
  for (auto& l : leaves) l->grad = Tensor<double>();
  auto loss = make_loss();
  mlfg::backward(loss);

  GradCheckResult res;
  Pcg32 rng(seed, 77);
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    const int64_t n = leaf->value.numel();
    for (int s = 0; s < samples_per_leaf; ++s) {
      const int64_t idx = static_cast<int64_t>(rng.below(static_cast<uint32_t>(n)));
      const double saved = leaf->value.data[idx];
      leaf->value.data[idx] = saved + h;
      const double lp = make_loss()->value.data[0];
      leaf->value.data[idx] = saved - h;
      const double lm = make_loss()->value.data[0];
      leaf->value.data[idx] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = leaf->grad.empty() ? 0.0 : leaf->grad.data[idx];
      const double rel =
          std::fabs(analytic - numeric) / std::max({1e-4, std::fabs(analytic), std::fabs(numeric)});
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
        res.worst_at = "leaf " + std::to_string(li) + " idx " + std::to_string(idx);
      }
    }
  }
  return res;
}

// Unique per-process temp dir under the build tree.
inline std::string temp_dir(const std::string& tag) {
  auto base = std::filesystem::temp_directory_path() / ("mlfg_test_" + tag + "_" +
                                                        std::to_string(::getpid()));
  std::filesystem::create_directories(base);
  return base.string();
}

}  // namespace testutil

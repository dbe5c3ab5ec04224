#pragma once

// Central-difference gradient checking. The builder is called many times and
// must reconstruct the same loss from the current parameter values, with no
// randomness of its own.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "udkit/nn/graph.hpp"

namespace testsupport {

struct GradCheckResult {
  double max_rel = 0.0;
  int checked = 0;
  std::string worst;
};

template <typename BuildFn>
GradCheckResult check_gradients(udkit::nn::ParamCollection& pc, BuildFn build,
                                double h = 1e-5, int max_entries_per_param = 400,
                                uint64_t seed = 12345) {
  using udkit::nn::Graph;
  using udkit::nn::Mat;

  pc.zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  std::vector<Mat> analytic;
  for (auto* p : pc.all()) analytic.push_back(p->grad);

  auto eval = [&]() {
    Graph g;
    return build(g).val()(0, 0);
  };

  std::mt19937_64 rng(seed);
  GradCheckResult res;
  auto params = pc.all();
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    if (!p->trainable) continue;
    std::vector<std::pair<int, int>> entries;
    long total = p->value.size();
    if (total <= max_entries_per_param) {
      for (int j = 0; j < p->cols(); ++j)
        for (int i = 0; i < p->rows(); ++i) entries.emplace_back(i, j);
    } else {
      std::uniform_int_distribution<int> ri(0, p->rows() - 1), rj(0, p->cols() - 1);
      for (int k = 0; k < max_entries_per_param; ++k)
        entries.emplace_back(ri(rng), rj(rng));
    }
    for (auto [i, j] : entries) {
      double save = p->value(i, j);
      p->value(i, j) = save + h;
      double lp = eval();
      p->value(i, j) = save - h;
      double lm = eval();
      p->value(i, j) = save;
      double num = (lp - lm) / (2.0 * h);
      double ana = analytic[pi](i, j);
      double rel = std::fabs(num - ana) /
                   std::max({1.0, std::fabs(num), std::fabs(ana)});
      ++res.checked;
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst = p->name + "(" + std::to_string(i) + "," + std::to_string(j) +
                    ") analytic=" + std::to_string(ana) +
                    " numeric=" + std::to_string(num);
      }
    }
  }
  return res;
}

}  // namespace testsupport

#pragma once

#include "emoji/nn/tape.hpp"

#include <functional>

namespace emoji::test {

// Central finite differences against tape gradients, in double precision.
// build() must construct the graph from the given leaves and return a scalar
// root. Checks up to max_coords randomly chosen coordinates of inputs[which].
inline double fd_check(
    const std::function<int(nn::Tape<double>&, const std::vector<int>&)>& build,
    std::vector<dmat> inputs, size_t which, int max_coords, uint64_t seed) {
  auto eval = [&](const std::vector<dmat>& xs) {
    nn::Tape<double> t;
    std::vector<int> ids;
    ids.reserve(xs.size());
    for (const auto& x : xs) ids.push_back(t.leaf(x, false));
    int root = build(t, ids);
    return t.val(root)(0, 0);
  };

  nn::Tape<double> t;
  std::vector<int> ids;
  for (const auto& x : inputs) ids.push_back(t.leaf(x, true));
  int root = build(t, ids);
  t.backward(root);
  dmat g = t.has_grad(ids[which])
               ? dmat(t.grad(ids[which]))
               : dmat(dmat::Zero(inputs[which].rows(), inputs[which].cols()));

  Rng rng(seed);
  double worst = 0.0;
  Eigen::Index total = inputs[which].size();
  int n = int(std::min<Eigen::Index>(max_coords, total));
  for (int i = 0; i < n; ++i) {
    Eigen::Index flat = Eigen::Index(rng.below(uint64_t(total)));
    Eigen::Index r = flat % inputs[which].rows(), c = flat / inputs[which].rows();
    double x0 = inputs[which](r, c);
    double h = 6e-6 * std::max(1.0, std::abs(x0));
    auto xs = inputs;
    xs[which](r, c) = x0 + h;
    double fp = eval(xs);
    xs[which](r, c) = x0 - h;
    double fm = eval(xs);
    double fd = (fp - fm) / (2 * h);
    double an = g(r, c);
    double rel = std::abs(fd - an) / std::max({1e-8, std::abs(fd), std::abs(an)});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace emoji::test

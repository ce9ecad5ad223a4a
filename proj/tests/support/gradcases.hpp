#pragma once

// Random (architecture, batch, strategy) configurations for checking the
// full training objective against central finite differences.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "support/random.hpp"
#include "unicat/fusion.hpp"
#include "unicat/gradcheck.hpp"
#include "unicat/model.hpp"
#include "unicat/objectives.hpp"

namespace testgen {

struct GradCase {
  unicat::ModelParams model;
  std::vector<unicat::Matrix> inputs;
  std::vector<std::size_t> labels;
  unicat::LossConfig loss;
  std::string label;
};

inline GradCase random_grad_case(Gen& g, std::uint64_t seed) {
  using namespace unicat;
  static constexpr Strategy kStrategies[] = {Strategy::FusionAvg, Strategy::FusionConcat,
                                             Strategy::UniCat};
  GradCase c;
  const Strategy strategy = kStrategies[g.size(0, 2)];
  const std::size_t M = g.size(1, 3);
  ArchConfig arch;
  arch.hidden.clear();
  for (std::size_t l = 0, n = g.size(0, 2); l < n; ++l) arch.hidden.push_back(g.size(2, 6));
  arch.embed_dim = g.size(2, 5);
  const std::size_t P = g.size(2, 4);
  const std::size_t K = g.size(2, 3);
  c.loss.lambda = std::vector<double>{0.0, 0.5, 1.0}[g.size(0, 2)];
  c.loss.alpha = g.coin() ? 0.0 : g.real(0.0, 0.3);

  std::vector<std::string> names;
  std::vector<std::size_t> dims;
  for (std::size_t m = 0; m < M; ++m) {
    names.push_back(fmt::format("m{}", m));
    dims.push_back(g.size(2, 5));
  }
  c.model = init_model(strategy, names, dims, arch, P, seed);
  // Move γ away from 1 and scale the classifiers so every term matters.
  auto jitter_head = [&](Head& h) {
    for (double& v : h.neck.gamma) v = g.real(0.5, 1.5);
    for (double& v : h.classifier.data()) v *= g.real(0.5, 2.0);
  };
  for (auto& s : c.model.streams) jitter_head(s.head);
  if (c.model.fused) jitter_head(*c.model.fused);

  c.labels = g.pk_labels(P, K);
  for (std::size_t m = 0; m < M; ++m) c.inputs.push_back(g.matrix(P * K, dims[m]));
  c.label = fmt::format("{} M={} hidden={} embed={} P={} K={} lambda={} alpha={:.3f}",
                        to_string(strategy), M, arch.hidden.size(), arch.embed_dim, P, K,
                        c.loss.lambda, c.loss.alpha);
  return c;
}

// Smallest distance to a non-differentiable point: ReLU pre-activations at
// zero, ties in batch-hard selection, zero anchor distances.
inline double kink_margin(const GradCase& c) {
  using namespace unicat;
  const ObjectiveResult res = evaluate_objective(c.model, c.inputs, c.labels, c.loss);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& out : res.stream_outputs)
    for (const auto& pre : out.pre_activations)
      for (double v : pre.data()) margin = std::min(margin, std::abs(v));

  std::vector<Matrix> mined;
  if (has_fused_head(c.model.strategy)) {
    std::vector<Matrix> zs;
    for (const auto& out : res.stream_outputs) zs.push_back(out.z);
    mined.push_back(fuse(zs, fusion_operator(c.model.strategy)));
  } else {
    for (const auto& out : res.stream_outputs) mined.push_back(out.z);
  }
  for (const Matrix& z : mined) {
    const Matrix d = pairwise_euclidean(z, z);
    for (std::size_t a = 0; a < z.rows(); ++a) {
      std::vector<double> pos, neg;
      for (std::size_t j = 0; j < z.rows(); ++j) {
        if (j == a) continue;
        (c.labels[j] == c.labels[a] ? pos : neg).push_back(d(a, j));
      }
      std::sort(pos.begin(), pos.end());
      std::sort(neg.begin(), neg.end());
      margin = std::min(margin, pos.back());
      if (pos.size() > 1) margin = std::min(margin, pos.back() - pos[pos.size() - 2]);
      if (neg.size() > 1) margin = std::min(margin, neg[1] - neg[0]);
    }
  }
  return margin;
}

// Draws cases until one lies at least `margin` away from every kink;
// `rejected` counts the discarded draws.
inline GradCase well_conditioned_case(Gen& g, std::uint64_t seed, double margin,
                                      std::size_t* rejected = nullptr) {
  for (std::uint64_t k = 0;; ++k) {
    GradCase c = random_grad_case(g, seed * 1000 + k);
    if (kink_margin(c) >= margin) return c;
    if (rejected) ++*rejected;
  }
}

// Denominator floor for the full-objective check: gradients below 1e-3 are
// held to an absolute error of 1e-5 · 1e-3 = 1e-8, about ten times the
// observed central-difference rounding noise at h = 1e-6.
inline constexpr double kObjectiveGradFloor = 1e-3;

inline std::vector<double> flatten(unicat::ModelParams& model) {
  std::vector<double> out;
  for (auto v : unicat::parameter_views(model)) out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline void unflatten(unicat::ModelParams& model, std::span<const double> flat) {
  std::size_t k = 0;
  for (auto v : unicat::parameter_views(model))
    for (double& x : v) x = flat[k++];
}

inline unicat::GradCheckReport check_grad_case(const GradCase& c) {
  using namespace unicat;
  ModelParams work = c.model;
  const std::vector<double> x0 = flatten(work);
  ObjectiveResult res = evaluate_objective(c.model, c.inputs, c.labels, c.loss);
  std::vector<double> analytic;
  for (auto v : gradient_views(res.grads)) analytic.insert(analytic.end(), v.begin(), v.end());
  auto f = [&](std::span<const double> p) {
    unflatten(work, p);
    return evaluate_objective(work, c.inputs, c.labels, c.loss).loss;
  };
  return finite_diff_check(f, x0, analytic, 1e-6, kObjectiveGradFloor);
}

}  // namespace testgen

#include "unicat/objectives.hpp"

#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

void validate(const LossConfig& cfg) {
  if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0) {
    throw ConfigError("loss: lambda must be finite and >= 0");
  }
  if (!std::isfinite(cfg.alpha)) throw ConfigError("loss: alpha must be finite");
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

TripletResult triplet_loss(const Matrix& z, std::span<const ClassIndex> labels, double alpha) {
  const std::size_t n = z.rows();
  if (labels.size() != n) throw ShapeError("triplet_loss: one label per row required");
  if (n == 0) throw BatchError("triplet_loss: empty batch");
  const Matrix dist = pairwise_euclidean(z, z);

  TripletResult res;
  res.grad = Matrix(n, z.cols());
  auto& sel = res.selection;
  sel.positive.resize(n);
  sel.negative.resize(n);
  sel.d_ap.resize(n);
  sel.d_an.resize(n);

  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t p = n;
    std::size_t q = n;
    double d_ap = -1.0;
    double d_an = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = dist(a, j);
      if (labels[j] == labels[a]) {
        if (d > d_ap) {
          d_ap = d;
          p = j;
        }
      } else if (d < d_an) {
        d_an = d;
        q = j;
      }
    }
    if (p == n || q == n) {
      throw BatchError(fmt::format("triplet_loss: anchor {} lacks a positive or a negative", a));
    }
    sel.positive[a] = p;
    sel.negative[a] = q;
    sel.d_ap[a] = d_ap;
    sel.d_an[a] = d_an;

    const double x = d_ap - d_an + alpha;
    total += softplus(x);
    const double c = sigmoid(x) * inv_n;
    const auto za = z.row(a);
    if (d_ap > 0.0) {
      const auto zp = z.row(p);
      const double s = c / d_ap;
      auto ga = res.grad.row(a);
      auto gp = res.grad.row(p);
      for (std::size_t k = 0; k < za.size(); ++k) {
        const double g = s * (za[k] - zp[k]);
        ga[k] += g;
        gp[k] -= g;
      }
    }
    if (d_an > 0.0) {
      const auto zn = z.row(q);
      const double s = c / d_an;
      auto ga = res.grad.row(a);
      auto gn = res.grad.row(q);
      for (std::size_t k = 0; k < za.size(); ++k) {
        const double g = s * (za[k] - zn[k]);
        ga[k] -= g;
        gn[k] += g;
      }
    }
  }
  res.loss = total * inv_n;
  return res;
}

CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const ClassIndex> labels) {
  const std::size_t b = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != b) throw ShapeError("cross_entropy: one label per row required");
  if (b == 0) throw BatchError("cross_entropy: empty batch");
  CrossEntropyResult res;
  res.grad = Matrix(b, c);
  const double inv_b = 1.0 / static_cast<double>(b);
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] >= c) {
      throw DataError(fmt::format("cross_entropy: label {} out of range for {} classes",
                                  labels[r], c));
    }
    const auto row = logits.row(r);
    double mx = row[0];
    for (double v : row) mx = v > mx ? v : mx;
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    total += log_z - row[labels[r]];
    auto g = res.grad.row(r);
    for (std::size_t j = 0; j < c; ++j) g[j] = std::exp(row[j] - log_z) * inv_b;
    g[labels[r]] -= inv_b;
  }
  res.loss = total * inv_b;
  return res;
}

CombinedResult combined_loss(const Matrix& z, const Matrix& logits,
                             std::span<const ClassIndex> labels, const LossConfig& cfg) {
  CombinedResult res;
  TripletResult tri = triplet_loss(z, labels, cfg.alpha);
  res.triplet = tri.loss;
  res.grad_z = std::move(tri.grad);
  res.loss = tri.loss;
  if (cfg.lambda == 0.0) return res;
  if (logits.cols() == 0) {
    throw ConfigError("combined_loss: lambda > 0 but the head has no classifier");
  }
  CrossEntropyResult ce = cross_entropy(logits, labels);
  res.cross_entropy = ce.loss;
  res.loss += cfg.lambda * ce.loss;
  res.grad_logits = std::move(ce.grad);
  for (double& v : res.grad_logits.data()) v *= cfg.lambda;
  return res;
}

StrategyLoss strategy_loss(std::span<const StreamOutput> streams,
                           const HeadOutput* fused_head_output, const Matrix* z_fuse,
                           std::span<const ClassIndex> labels, Strategy strategy,
                           const LossConfig& cfg) {
  StrategyLoss res;
  if (has_fused_head(strategy)) {
    if (fused_head_output == nullptr || z_fuse == nullptr) {
      throw ConfigError(fmt::format("strategy_loss: {} needs a fused head output",
                                    to_string(strategy)));
    }
    CombinedResult c = combined_loss(*z_fuse, fused_head_output->logits, labels, cfg);
    res.loss = c.loss;
    res.heads.push_back({std::move(c.grad_z), std::move(c.grad_logits)});
    return res;
  }
  for (const auto& s : streams) {
    CombinedResult c = combined_loss(s.z, s.head.logits, labels, cfg);
    res.loss += c.loss;
    res.stream_losses.push_back(c.loss);
    res.heads.push_back({std::move(c.grad_z), std::move(c.grad_logits)});
  }
  return res;
}

ObjectiveResult evaluate_objective(const ModelParams& model, std::span<const Matrix> inputs,
                                   std::span<const ClassIndex> labels, const LossConfig& cfg) {
  if (inputs.size() != model.streams.size()) {
    throw ShapeError(fmt::format("evaluate_objective: {} inputs for {} streams", inputs.size(),
                                 model.streams.size()));
  }
  ObjectiveResult res;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    res.stream_outputs.push_back(forward(model.streams[i], inputs[i], Mode::Train));
  }
  res.grads.streams.resize(model.streams.size());

  if (!has_fused_head(model.strategy)) {
    StrategyLoss sl = strategy_loss(res.stream_outputs, nullptr, nullptr, labels,
                                    model.strategy, cfg);
    res.loss = sl.loss;
    for (std::size_t i = 0; i < model.streams.size(); ++i) {
      res.grads.streams[i] = backward(model.streams[i], res.stream_outputs[i],
                                      sl.heads[i].grad_z, sl.heads[i].grad_logits);
    }
    return res;
  }

  if (!model.fused) throw ConfigError("evaluate_objective: fusion strategy without a fused head");
  const FusionOperator op = fusion_operator(model.strategy);
  std::vector<Matrix> zs;
  std::vector<std::size_t> dims;
  for (const auto& o : res.stream_outputs) {
    zs.push_back(o.z);
    dims.push_back(o.z.cols());
  }
  const Matrix z_fuse = fuse(zs, op, false);
  res.fused_output = head_forward(*model.fused, z_fuse, Mode::Train);
  StrategyLoss sl = strategy_loss(res.stream_outputs, &*res.fused_output, &z_fuse, labels,
                                  model.strategy, cfg);
  res.loss = sl.loss;

  HeadGrads hg = head_backward(*model.fused, *res.fused_output, sl.heads[0].grad_logits);
  Matrix grad_fuse = std::move(hg.input);
  {
    auto dst = grad_fuse.data();
    auto src = sl.heads[0].grad_z.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  std::vector<Matrix> per_stream = fuse_backward(grad_fuse, op, dims);
  for (std::size_t i = 0; i < model.streams.size(); ++i) {
    res.grads.streams[i] = mlp_backward(model.streams[i], res.stream_outputs[i], per_stream[i]);
  }
  hg.input = std::move(grad_fuse);
  res.grads.fused = std::move(hg);
  return res;
}

void commit_batch_stats(ModelParams& model, const ObjectiveResult& result) {
  for (std::size_t i = 0; i < model.streams.size(); ++i) {
    commit_batch_stats(model.streams[i].head.neck, result.stream_outputs[i].head);
  }
  if (model.fused && result.fused_output) commit_batch_stats(model.fused->neck, *result.fused_output);
}

}  // namespace unicat

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "unicat/fusion.hpp"
#include "unicat/model.hpp"
#include "unicat/numerics.hpp"

namespace unicat {

// Class index of each sample within a batch (contiguous 0..C-1).
using ClassIndex = std::size_t;

struct LossConfig {
  double lambda = 1.0;  // weight of the cross-entropy term
  double alpha = 0.0;   // triplet margin
};

void validate(const LossConfig& cfg);

struct TripletSelection {
  std::vector<std::size_t> positive;  // hardest positive per anchor
  std::vector<std::size_t> negative;  // hardest negative per anchor
  std::vector<double> d_ap;
  std::vector<double> d_an;
};

struct TripletResult {
  double loss = 0.0;
  Matrix grad;
  TripletSelection selection;
};

// Batch-hard soft-margin triplet loss on Euclidean distances:
// mean over anchors of log(1 + exp(d(a, p*) - d(a, n*) + alpha)), where p* is
// the farthest same-label sample and n* the nearest different-label sample
// (ties to the lowest index). The gradient flows through the selected pairs
// only; a zero distance contributes a zero subgradient.
TripletResult triplet_loss(const Matrix& z, std::span<const ClassIndex> labels, double alpha);

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad;
};

// Mean softmax cross-entropy with max-subtraction; grad = (softmax - onehot)/B.
CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const ClassIndex> labels);

struct CombinedResult {
  double loss = 0.0;
  double triplet = 0.0;
  double cross_entropy = 0.0;
  Matrix grad_z;
  Matrix grad_logits;  // empty when lambda == 0 or the head has no classifier
};

// triplet(z) + lambda * CE(logits). An empty `logits` matrix (a head without
// classifier) is only valid when lambda == 0.
CombinedResult combined_loss(const Matrix& z, const Matrix& logits,
                             std::span<const ClassIndex> labels, const LossConfig& cfg);

// Gradients delivered to one head: at its pre-BN embedding and at its logits.
struct HeadLossGrads {
  Matrix grad_z;
  Matrix grad_logits;
};

struct StrategyLoss {
  double loss = 0.0;
  // UniCat: one entry per stream. Fusion strategies: one entry for the fused
  // head (grad_z is the gradient at z_fuse from the triplet term).
  std::vector<HeadLossGrads> heads;
  // UniCat only: each stream's own local loss.
  std::vector<double> stream_losses;
};

// FusionAvg/FusionConcat: combined_loss on (z_fuse, fused logits).
// UniCat: sum over streams of combined_loss(z_i, logits_i).
StrategyLoss strategy_loss(std::span<const StreamOutput> streams,
                           const HeadOutput* fused_head_output, const Matrix* z_fuse,
                           std::span<const ClassIndex> labels, Strategy strategy,
                           const LossConfig& cfg);

// Complete training objective for one batch: train-mode forward of every
// stream (and the fused head), strategy_loss, and backward to all
// parameters. Does not mutate the model.
struct ObjectiveResult {
  double loss = 0.0;
  ModelGrads grads;
  std::vector<StreamOutput> stream_outputs;
  std::optional<HeadOutput> fused_output;
};

ObjectiveResult evaluate_objective(const ModelParams& model, std::span<const Matrix> inputs,
                                   std::span<const ClassIndex> labels, const LossConfig& cfg);

// Momentum update of every BNNeck touched by `result` (streams, fused head).
void commit_batch_stats(ModelParams& model, const ObjectiveResult& result);

}  // namespace unicat

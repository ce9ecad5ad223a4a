#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unicat/evaluate.hpp"
#include "unicat/model.hpp"
#include "unicat/objectives.hpp"
#include "unicat/rng.hpp"
#include "unicat/synthdata.hpp"

namespace unicat {

struct TrainConfig {
  Strategy strategy = Strategy::UniCat;
  std::size_t P = 16;  // identities per batch
  std::size_t K = 4;   // samples per identity
  double lr_base = 0.016;
  double momentum = 0.9;
  std::size_t epochs = 200;
  std::size_t warmup_epochs = 10;
  LossConfig loss;
  ArchConfig arch;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& cfg);

// Stable 64-bit digest of every field (FNV-1a over a canonical rendering).
std::uint64_t config_hash(const TrainConfig& cfg);

// Cosine schedule floor as a fraction of lr_base.
inline constexpr double kLrFloorFraction = 0.002;

// Linear warmup lr_base·(epoch+1)/warmup for epoch < warmup, then cosine
// decay from lr_base to kLrFloorFraction·lr_base over the remaining epochs.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// P distinct classes without replacement, K positions per class (with
// replacement only for classes holding fewer than K samples). Returns
// positions into `labels`, grouped by class in draw order.
std::vector<std::size_t> pk_sample(std::span<const ClassIndex> labels, std::size_t P,
                                   std::size_t K, Rng& rng);

struct OptState {
  std::vector<std::vector<double>> velocity;
  std::size_t step = 0;
  std::size_t epoch = 0;
};

// v ← momentum·v + g; p ← p − lr·v. Velocity buffers are created (zero) on
// the first call and must keep their shapes afterwards.
void sgd_step(std::span<const std::span<double>> params,
              std::span<const std::span<double>> grads, OptState& state, double lr,
              double momentum);

struct RunRecord {
  TrainConfig config;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_lr;
  // Train identity of each classifier row.
  std::vector<Label> class_ids;
  ModelParams model;
};

// Deterministic in (ds, cfg). Each epoch runs ceil(n_train / (P·K)) PK
// batches drawn from split(seed, "pipeline/sampler").
RunRecord train(const MultimodalDataset& ds, const TrainConfig& cfg);

struct GridSpec {
  std::vector<std::size_t> batch_sizes;  // P·K; K is taken from the base config
  std::vector<double> learning_rates;
  double validation_fraction = 0.1;
  std::size_t validation_query_views = 2;
  EvalOptions eval;
};

struct GridCell {
  std::size_t batch_size = 0;
  double lr = 0.0;
  double validation_map = 0.0;
  RunRecord run;
};

struct GridResult {
  std::vector<GridCell> cells;  // batch-size major, in GridSpec order
  std::size_t best = 0;

  const RunRecord& best_run() const { return cells.at(best).run; }
};

// Trains every (batch size, lr) cell on the train ids minus a held-out 10%
// and selects by multimodal mAP on the held-out ids; ties prefer the lower
// lr, then the smaller batch.
GridResult grid_search(const MultimodalDataset& ds, const TrainConfig& base,
                       const GridSpec& grid, std::size_t jobs = 1);

}  // namespace unicat

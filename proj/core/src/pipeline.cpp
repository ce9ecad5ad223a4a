#include "unicat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/core.h>

#include "unicat/errors.hpp"
#include "unicat/parallel.hpp"

namespace unicat {

void validate(const TrainConfig& cfg) {
  if (cfg.P < 2 || cfg.K < 2) throw ConfigError("train: P and K must both be >= 2");
  if (!std::isfinite(cfg.lr_base) || cfg.lr_base <= 0.0) {
    throw ConfigError("train: lr_base must be finite and > 0");
  }
  if (!std::isfinite(cfg.momentum) || cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw ConfigError("train: momentum must be in [0, 1)");
  }
  if (cfg.epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (cfg.warmup_epochs >= cfg.epochs) throw ConfigError("train: warmup_epochs must be < epochs");
  if (cfg.arch.embed_dim == 0) throw ConfigError("train: embed_dim must be >= 1");
  if (!(cfg.arch.bn_eps > 0.0) || cfg.arch.bn_momentum <= 0.0 || cfg.arch.bn_momentum > 1.0) {
    throw ConfigError("train: bn_eps must be > 0 and bn_momentum in (0, 1]");
  }
  validate(cfg.loss);
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  std::string s = fmt::format("strategy={};P={};K={};lr={:a};momentum={:a};epochs={};warmup={};"
                              "lambda={:a};alpha={:a};embed={};bn_m={:a};bn_eps={:a};seed={};hidden=",
                              to_string(cfg.strategy), cfg.P, cfg.K, cfg.lr_base, cfg.momentum,
                              cfg.epochs, cfg.warmup_epochs, cfg.loss.lambda, cfg.loss.alpha,
                              cfg.arch.embed_dim, cfg.arch.bn_momentum, cfg.arch.bn_eps, cfg.seed);
  for (std::size_t w : cfg.arch.hidden) s += fmt::format("{},", w);
  return fnv1a64(s);
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch >= cfg.epochs) {
    throw DataError(fmt::format("lr_at: epoch {} outside [0, {})", epoch, cfg.epochs));
  }
  if (epoch < cfg.warmup_epochs) {
    return cfg.lr_base * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
  }
  const double lr_min = kLrFloorFraction * cfg.lr_base;
  const double t = static_cast<double>(epoch - cfg.warmup_epochs) /
                   static_cast<double>(cfg.epochs - cfg.warmup_epochs);
  return lr_min + 0.5 * (cfg.lr_base - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<std::size_t> pk_sample(std::span<const ClassIndex> labels, std::size_t P,
                                   std::size_t K, Rng& rng) {
  std::map<ClassIndex, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  if (members.size() < P) {
    throw BatchError(fmt::format("pk_sample: {} distinct ids, need P = {}", members.size(), P));
  }
  std::vector<const std::vector<std::size_t>*> classes;
  classes.reserve(members.size());
  for (const auto& [cls, rows] : members) classes.push_back(&rows);

  std::vector<std::size_t> batch;
  batch.reserve(P * K);
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t j = p + rng.uniform_index(classes.size() - p);
    std::swap(classes[p], classes[j]);
    const auto& rows = *classes[p];
    if (rows.size() >= K) {
      std::vector<std::size_t> pool = rows;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t m = k + rng.uniform_index(pool.size() - k);
        std::swap(pool[k], pool[m]);
        batch.push_back(pool[k]);
      }
    } else {
      for (std::size_t k = 0; k < K; ++k) batch.push_back(rows[rng.uniform_index(rows.size())]);
    }
  }
  return batch;
}

void sgd_step(std::span<const std::span<double>> params,
              std::span<const std::span<double>> grads, OptState& state, double lr,
              double momentum) {
  if (params.size() != grads.size()) {
    throw ShapeError(fmt::format("sgd_step: {} parameter blocks, {} gradient blocks",
                                 params.size(), grads.size()));
  }
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.emplace_back(p.size(), 0.0);
  }
  if (state.velocity.size() != params.size()) throw ShapeError("sgd_step: velocity block count");
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& v = state.velocity[b];
    if (p.size() != g.size() || v.size() != p.size()) {
      throw ShapeError(fmt::format("sgd_step: block {} has mismatched sizes", b));
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = momentum * v[k] + g[k];
      p[k] -= lr * v[k];
    }
  }
  ++state.step;
}

RunRecord train(const MultimodalDataset& ds, const TrainConfig& cfg) {
  validate(cfg);
  validate(ds);
  const std::vector<std::size_t> train_rows = ds.indices(Split::Train);
  if (train_rows.empty()) throw DataError("train: dataset has no train samples");

  RunRecord rec;
  rec.config = cfg;
  rec.config_hash = config_hash(cfg);
  rec.seed = cfg.seed;
  for (std::size_t r : train_rows) rec.class_ids.push_back(ds.ids[r]);
  std::sort(rec.class_ids.begin(), rec.class_ids.end());
  rec.class_ids.erase(std::unique(rec.class_ids.begin(), rec.class_ids.end()),
                      rec.class_ids.end());
  std::vector<ClassIndex> labels;
  labels.reserve(train_rows.size());
  for (std::size_t r : train_rows) {
    labels.push_back(static_cast<ClassIndex>(
        std::lower_bound(rec.class_ids.begin(), rec.class_ids.end(), ds.ids[r]) -
        rec.class_ids.begin()));
  }

  std::vector<std::size_t> input_dims;
  for (const auto& f : ds.features) input_dims.push_back(f.cols());
  rec.model = init_model(cfg.strategy, ds.modality_names, input_dims, cfg.arch,
                         rec.class_ids.size(), cfg.seed);

  Rng sampler = split(cfg.seed, "pipeline/sampler");
  const std::size_t batch_size = cfg.P * cfg.K;
  const std::size_t batches = (train_rows.size() + batch_size - 1) / batch_size;
  OptState opt;

  std::vector<std::size_t> rows(batch_size);
  std::vector<ClassIndex> batch_labels(batch_size);
  std::vector<Matrix> inputs(ds.num_modalities());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.epoch = epoch;
    const double lr = lr_at(epoch, cfg);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::vector<std::size_t> picks = pk_sample(labels, cfg.P, cfg.K, sampler);
      for (std::size_t k = 0; k < picks.size(); ++k) {
        rows[k] = train_rows[picks[k]];
        batch_labels[k] = labels[picks[k]];
      }
      for (std::size_t m = 0; m < ds.num_modalities(); ++m) {
        inputs[m] = select_rows(ds.features[m], rows);
      }
      ObjectiveResult res = evaluate_objective(rec.model, inputs, batch_labels, cfg.loss);
      if (!std::isfinite(res.loss)) {
        throw NumericError(fmt::format("train: non-finite loss at epoch {} batch {}", epoch, b));
      }
      commit_batch_stats(rec.model, res);
      const auto params = parameter_views(rec.model);
      const auto grads = gradient_views(res.grads);
      sgd_step(params, grads, opt, lr, cfg.momentum);
      loss_sum += res.loss;
    }
    rec.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    rec.epoch_lr.push_back(lr);
  }
  for (const auto& p : parameter_views(rec.model)) require_finite(p, "train: final parameters");
  return rec;
}

GridResult grid_search(const MultimodalDataset& ds, const TrainConfig& base,
                       const GridSpec& grid, std::size_t jobs) {
  if (grid.batch_sizes.empty() || grid.learning_rates.empty()) {
    throw ConfigError("grid_search: grid must have at least one batch size and one lr");
  }
  Rng val_rng = split(base.seed, "pipeline/validation");
  const MultimodalDataset carved =
      carve_validation(ds, grid.validation_fraction, grid.validation_query_views, val_rng);

  GridResult result;
  for (std::size_t bs : grid.batch_sizes) {
    if (bs % base.K != 0 || bs / base.K < 2) {
      throw ConfigError(fmt::format("grid_search: batch size {} is not P·K with K = {}, P >= 2",
                                    bs, base.K));
    }
    for (double lr : grid.learning_rates) {
      GridCell cell;
      cell.batch_size = bs;
      cell.lr = lr;
      result.cells.push_back(std::move(cell));
    }
  }
  parallel_for(result.cells.size(), jobs, [&](std::size_t i) {
    GridCell& cell = result.cells[i];
    TrainConfig cfg = base;
    cfg.P = cell.batch_size / base.K;
    cfg.lr_base = cell.lr;
    cell.run = train(carved, cfg);
    cell.validation_map = eval_multimodal(cell.run.model, carved, grid.eval).mAP;
  });

  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    const GridCell& c = result.cells[i];
    const GridCell& b = result.cells[result.best];
    const bool better =
        c.validation_map > b.validation_map ||
        (c.validation_map == b.validation_map &&
         (c.lr < b.lr || (c.lr == b.lr && c.batch_size < b.batch_size)));
    if (better) result.best = i;
  }
  return result;
}

}  // namespace unicat

#include "unicat/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include <fmt/core.h>

#include "unicat/errors.hpp"
#include "unicat/parallel.hpp"

namespace unicat {

std::string_view to_string(SuiteKind k) noexcept {
  switch (k) {
    case SuiteKind::LazinessClean: return "laziness-clean";
    case SuiteKind::WeakLink: return "weak-link";
    case SuiteKind::Ensemble: return "ensemble";
    case SuiteKind::TrainVsTest: return "train-vs-test";
  }
  return "unknown";
}

SuiteKind parse_suite(std::string_view name) {
  for (SuiteKind k : {SuiteKind::LazinessClean, SuiteKind::WeakLink, SuiteKind::Ensemble,
                      SuiteKind::TrainVsTest}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError(fmt::format(
      "unknown suite '{}' (expected laziness-clean, weak-link, ensemble or train-vs-test)", name));
}

SuiteConfig default_suite(SuiteKind kind) {
  SuiteConfig s;
  s.kind = kind;
  switch (kind) {
    case SuiteKind::LazinessClean:
    case SuiteKind::TrainVsTest:
    case SuiteKind::Ensemble:
      s.data = clean_preset();
      break;
    case SuiteKind::WeakLink:
      s.data = weak_link_preset();
      break;
  }
  return s;
}

std::uint64_t synth_config_hash(const SynthConfig& cfg) {
  std::string s = fmt::format("latent={};ids_train={};ids_test={};views={};jitter={:a};query={};seed={}",
                              cfg.latent_dim, cfg.ids_train, cfg.ids_test, cfg.views_per_id,
                              cfg.view_jitter, cfg.query_views, cfg.seed);
  for (const auto& m : cfg.modalities) {
    s += fmt::format("|{}:{}:{:a}:{:a}:{}:{:a}", m.name, m.obs_dim, m.signal_scale, m.noise_sigma,
                     m.spurious_dim, m.spurious_strength);
  }
  return fnv1a64(s);
}

std::size_t required_seeds(std::size_t n) noexcept { return (4 * n + 4) / 5; }

std::size_t weakest_modality(const SynthConfig& cfg) {
  if (cfg.modalities.empty()) throw ConfigError("weakest_modality: no modalities");
  std::size_t w = 0;
  for (std::size_t i = 1; i < cfg.modalities.size(); ++i) {
    if (cfg.modalities[i].noise_sigma > cfg.modalities[w].noise_sigma) w = i;
  }
  return w;
}

std::shared_ptr<const RunRecord> TrainCache::get_or_train(const std::string& data_key,
                                                          const MultimodalDataset& ds,
                                                          const TrainConfig& cfg) {
  const std::string key = fmt::format("{}#{:016x}", data_key, config_hash(cfg));
  std::promise<std::shared_ptr<const RunRecord>> promise;
  std::shared_future<std::shared_ptr<const RunRecord>> future;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto it = runs_.find(key);
    if (it == runs_.end()) {
      future = promise.get_future().share();
      runs_.emplace(key, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const RunRecord>(train(ds, cfg)));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

std::size_t TrainCache::size() {
  std::lock_guard lock(mu_);
  return runs_.size();
}

namespace {

constexpr const char* kMultimodal = "multimodal";

struct Job {
  std::size_t seed_index;
  Strategy strategy;
};

MultimodalDataset suite_dataset(const SuiteConfig& suite, std::uint64_t seed, std::string& key) {
  SynthConfig data = suite.data;
  data.seed = seed;
  key = fmt::format("synth={:016x}", synth_config_hash(data));
  MultimodalDataset ds = make_dataset(data);
  if (suite.kind == SuiteKind::Ensemble) {
    key += fmt::format(";replicate={}x{}", suite.ensemble_modality, suite.ensemble_copies);
    ds = replicate_modality(ds, suite.ensemble_modality, suite.ensemble_copies);
  }
  return ds;
}

std::vector<TableColumn> suite_columns(const SuiteConfig& suite, const MultimodalDataset& ds) {
  std::vector<TableColumn> cols;
  if (suite.kind == SuiteKind::TrainVsTest) {
    for (const auto& name : ds.modality_names) {
      cols.push_back({name, "train"});
      cols.push_back({name, "test"});
    }
    return cols;
  }
  cols.push_back({kMultimodal, "test"});
  for (const auto& name : ds.modality_names) cols.push_back({name, "test"});
  return cols;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

using CellKey = std::tuple<std::size_t, Strategy, std::string, std::string>;

class CellLookup {
 public:
  CellLookup(const std::vector<SuiteCell>& cells, std::span<const std::uint64_t> seeds) {
    for (const auto& c : cells) {
      const auto pos = static_cast<std::size_t>(
          std::find(seeds.begin(), seeds.end(), c.seed) - seeds.begin());
      map_[{pos, c.strategy, c.evaluated, c.split}] = c.mAP;
    }
  }
  double at(std::size_t seed_index, Strategy s, const std::string& evaluated,
            const std::string& split) const {
    auto it = map_.find({seed_index, s, evaluated, split});
    if (it == map_.end()) {
      throw StateError(fmt::format("suite: missing cell {} / {} / {}", to_string(s), evaluated, split));
    }
    return it->second;
  }

 private:
  std::map<CellKey, double> map_;
};

bool has_strategy(const SuiteConfig& suite, Strategy s) {
  return std::find(suite.strategies.begin(), suite.strategies.end(), s) != suite.strategies.end();
}

template <typename Pred>
ClaimResult make_claim(std::string name, std::string description, std::size_t num_seeds,
                       Pred&& seed_passes) {
  ClaimResult c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.seeds_total = num_seeds;
  c.seeds_required = required_seeds(num_seeds);
  for (std::size_t i = 0; i < num_seeds; ++i) {
    const bool ok = seed_passes(i);
    c.per_seed.push_back(ok);
    c.seeds_passed += ok ? 1 : 0;
  }
  c.pass = c.seeds_passed >= c.seeds_required;
  return c;
}

std::vector<ClaimResult> evaluate_claims(const SuiteConfig& suite, const CellLookup& cells,
                                         const std::vector<std::string>& streams,
                                         std::size_t num_seeds) {
  std::vector<ClaimResult> claims;
  const bool all = has_strategy(suite, Strategy::UniCat) &&
                   has_strategy(suite, Strategy::FusionAvg) &&
                   has_strategy(suite, Strategy::FusionConcat);
  switch (suite.kind) {
    case SuiteKind::LazinessClean:
      if (!all) break;
      claims.push_back(make_claim(
          "unimodal-laziness",
          "UniCat per-stream test mAP > Fusion-avg and Fusion-concat for every stream",
          num_seeds, [&](std::size_t i) {
            for (const auto& s : streams) {
              const double u = cells.at(i, Strategy::UniCat, s, "test");
              if (!(u > cells.at(i, Strategy::FusionAvg, s, "test")) ||
                  !(u > cells.at(i, Strategy::FusionConcat, s, "test"))) {
                return false;
              }
            }
            return true;
          }));
      break;
    case SuiteKind::WeakLink: {
      if (!has_strategy(suite, Strategy::UniCat) || !has_strategy(suite, Strategy::FusionConcat)) {
        break;
      }
      const std::string& weak = streams.at(weakest_modality(suite.data));
      claims.push_back(make_claim(
          "weak-stream-rescue",
          fmt::format("Fusion-concat test mAP of weak stream '{}' > UniCat", weak), num_seeds,
          [&](std::size_t i) {
            return cells.at(i, Strategy::FusionConcat, weak, "test") >
                   cells.at(i, Strategy::UniCat, weak, "test");
          }));
      break;
    }
    case SuiteKind::Ensemble:
      if (!all) break;
      claims.push_back(make_claim(
          "ensemble-independence",
          "UniCat multimodal test mAP >= Fusion-avg and Fusion-concat", num_seeds,
          [&](std::size_t i) {
            const double u = cells.at(i, Strategy::UniCat, kMultimodal, "test");
            return u >= cells.at(i, Strategy::FusionAvg, kMultimodal, "test") &&
                   u >= cells.at(i, Strategy::FusionConcat, kMultimodal, "test");
          }));
      break;
    case SuiteKind::TrainVsTest:
      if (!all) break;
      claims.push_back(make_claim(
          "fusion-fits-train-less",
          "Fusion-avg and Fusion-concat train-set mAP < UniCat for every stream", num_seeds,
          [&](std::size_t i) {
            for (const auto& s : streams) {
              const double u = cells.at(i, Strategy::UniCat, s, "train");
              if (!(cells.at(i, Strategy::FusionAvg, s, "train") < u) ||
                  !(cells.at(i, Strategy::FusionConcat, s, "train") < u)) {
                return false;
              }
            }
            return true;
          }));
      break;
  }
  return claims;
}

}  // namespace

SuiteResult run_suite(const SuiteConfig& suite, std::span<const std::uint64_t> seeds,
                      std::size_t jobs, TrainCache* cache) {
  if (seeds.empty()) throw ConfigError("run_suite: at least one seed is required");
  if (suite.strategies.empty()) throw ConfigError("run_suite: no strategies");
  {
    std::vector<std::uint64_t> sorted(seeds.begin(), seeds.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("run_suite: seeds must be distinct");
    }
  }
  validate(suite.data);
  validate(suite.train);

  std::vector<MultimodalDataset> datasets;
  std::vector<std::string> keys;
  for (std::uint64_t seed : seeds) {
    std::string key;
    datasets.push_back(suite_dataset(suite, seed, key));
    keys.push_back(std::move(key));
  }

  std::vector<Job> work;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (Strategy st : suite.strategies) work.push_back({s, st});
  }
  std::vector<std::vector<SuiteCell>> produced(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t j) {
    const Job& job = work[j];
    const MultimodalDataset& ds = datasets[job.seed_index];
    const std::uint64_t seed = seeds[job.seed_index];
    TrainConfig cfg = suite.train;
    cfg.strategy = job.strategy;
    cfg.seed = seed;
    std::shared_ptr<const RunRecord> run;
    if (cache != nullptr) {
      run = cache->get_or_train(keys[job.seed_index], ds, cfg);
    } else {
      run = std::make_shared<const RunRecord>(train(ds, cfg));
    }
    auto push = [&](std::string evaluated, std::string split, const RetrievalReport& r) {
      produced[j].push_back({job.strategy, std::move(evaluated), std::move(split), seed, r.mAP,
                             r.rank1});
    };
    if (suite.kind == SuiteKind::TrainVsTest) {
      for (std::size_t i = 0; i < ds.num_modalities(); ++i) {
        push(ds.modality_names[i], "train",
             eval_trainset(run->model, ds, i, suite.trainset_query_views, seed, suite.eval));
        push(ds.modality_names[i], "test", eval_unimodal(run->model, ds, i, suite.eval));
      }
      return;
    }
    push(kMultimodal, "test", eval_multimodal(run->model, ds, suite.eval));
    for (std::size_t i = 0; i < ds.num_modalities(); ++i) {
      push(ds.modality_names[i], "test", eval_unimodal(run->model, ds, i, suite.eval));
    }
  });

  SuiteResult result;
  result.config = suite;
  for (auto& v : produced) {
    for (auto& c : v) result.cells.push_back(std::move(c));
  }

  ExperimentTable& table = result.table;
  table.suite = std::string(to_string(suite.kind));
  table.seeds.assign(seeds.begin(), seeds.end());
  table.strategies = suite.strategies;
  table.columns = suite_columns(suite, datasets.front());
  for (Strategy st : suite.strategies) {
    for (const auto& col : table.columns) {
      std::vector<double> maps;
      std::vector<double> r1s;
      for (std::uint64_t seed : seeds) {
        for (const auto& c : result.cells) {
          if (c.seed == seed && c.strategy == st && c.evaluated == col.evaluated &&
              c.split == col.split) {
            maps.push_back(c.mAP);
            r1s.push_back(c.rank1);
          }
        }
      }
      TableRow row;
      row.strategy = st;
      row.evaluated = col.evaluated;
      row.split = col.split;
      row.map_mean = mean_of(maps);
      row.map_std = std_of(maps);
      row.rank1_mean = mean_of(r1s);
      row.rank1_std = std_of(r1s);
      row.num_seeds = maps.size();
      table.rows.push_back(std::move(row));
    }
  }

  const CellLookup lookup(result.cells, seeds);
  result.claims = evaluate_claims(suite, lookup, datasets.front().modality_names, seeds.size());
  return result;
}

}  // namespace unicat

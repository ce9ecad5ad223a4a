#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unicat/evaluate.hpp"
#include "unicat/pipeline.hpp"
#include "unicat/synthdata.hpp"

namespace unicat {

// Directional analogues of the modality-laziness experiments.
//   laziness-clean  per-strategy multimodal and per-stream test retrieval
//   weak-link       same, on data with one noisy, overfitting-prone stream
//   ensemble        one modality presented as two identical streams
//   train-vs-test   per-stream retrieval on the train ids and on the test ids
enum class SuiteKind { LazinessClean, WeakLink, Ensemble, TrainVsTest };

std::string_view to_string(SuiteKind k) noexcept;
SuiteKind parse_suite(std::string_view name);

struct SuiteConfig {
  SuiteKind kind = SuiteKind::LazinessClean;
  // Base data and training configs; the seed fields are replaced per seed.
  SynthConfig data;
  TrainConfig train;
  EvalOptions eval;
  std::vector<Strategy> strategies{Strategy::FusionAvg, Strategy::FusionConcat,
                                   Strategy::UniCat};
  std::size_t ensemble_modality = 0;
  std::size_t ensemble_copies = 2;
  std::size_t trainset_query_views = 2;
};

// The committed configuration of each suite.
SuiteConfig default_suite(SuiteKind kind);

// One evaluated quantity for one seed.
struct SuiteCell {
  Strategy strategy = Strategy::UniCat;
  std::string evaluated;  // stream name or "multimodal"
  std::string split;      // "test" or "train"
  std::uint64_t seed = 0;
  double mAP = 0.0;
  double rank1 = 0.0;
};

struct TableRow {
  Strategy strategy = Strategy::UniCat;
  std::string evaluated;
  std::string split;
  double map_mean = 0.0;
  double map_std = 0.0;
  double rank1_mean = 0.0;
  double rank1_std = 0.0;
  std::size_t num_seeds = 0;
};

struct TableColumn {
  std::string evaluated;
  std::string split;
};

// Mean ± sample standard deviation (0 for a single seed) over seeds. Rows
// are strategy-major, following `strategies` and `columns` order.
struct ExperimentTable {
  std::string suite;
  std::vector<std::uint64_t> seeds;
  std::vector<Strategy> strategies;
  std::vector<TableColumn> columns;
  std::vector<TableRow> rows;
};

struct ClaimResult {
  std::string name;
  std::string description;
  std::size_t seeds_passed = 0;
  std::size_t seeds_total = 0;
  std::size_t seeds_required = 0;
  std::vector<bool> per_seed;  // aligned with the suite seeds
  bool pass = false;
};

struct SuiteResult {
  SuiteConfig config;
  std::vector<SuiteCell> cells;
  ExperimentTable table;
  std::vector<ClaimResult> claims;
};

// In-process memo of trained runs keyed by (dataset fingerprint, train config
// hash), so suites sharing a dataset and config train once. Thread-safe.
class TrainCache {
 public:
  std::shared_ptr<const RunRecord> get_or_train(const std::string& data_key,
                                                const MultimodalDataset& ds,
                                                const TrainConfig& cfg);
  std::size_t size();

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_future<std::shared_ptr<const RunRecord>>> runs_;
};

std::uint64_t synth_config_hash(const SynthConfig& cfg);

// Seeds required for a "≥ 4 of 5" style claim over n seeds: ceil(4n / 5).
std::size_t required_seeds(std::size_t n) noexcept;

// Trains and evaluates every (seed, strategy) cell, aggregates the table and
// evaluates the suite's directional claims. Cells run on up to `jobs`
// threads; the result does not depend on `jobs`.
SuiteResult run_suite(const SuiteConfig& suite, std::span<const std::uint64_t> seeds,
                      std::size_t jobs = 1, TrainCache* cache = nullptr);

// Index of the stream with the largest noise_sigma (the weak link).
std::size_t weakest_modality(const SynthConfig& cfg);

}  // namespace unicat

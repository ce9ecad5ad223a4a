#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "unicat/evaluate.hpp"
#include "unicat/experiments.hpp"
#include "unicat/pipeline.hpp"
#include "unicat/synthdata.hpp"

namespace unicat::cli {

struct Replication {
  std::size_t modality = 0;
  std::size_t copies = 2;
};

struct GridConfig {
  std::vector<std::size_t> batch_sizes{64, 128, 256};
  std::vector<double> learning_rates{0.008, 0.016, 0.032};
  double validation_fraction = 0.1;
  std::size_t validation_query_views = 2;
};

// Everything a gen/train/eval run needs. Parsed from a JSON document whose
// sections all default; unknown keys are rejected.
struct ExperimentConfig {
  SynthConfig data;
  std::optional<Replication> replicate;
  TrainConfig train;
  std::optional<GridConfig> grid;
  EvalOptions eval;
  std::size_t trainset_query_views = 2;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved canonical form; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const SuiteConfig& suite);

// FNV-1a of the canonical JSON text.
std::uint64_t config_hash(const nlohmann::json& canonical);
std::string hash_hex(std::uint64_t h);

// Synthetic dataset described by the config (with replication applied).
MultimodalDataset build_dataset(const ExperimentConfig& cfg);

}  // namespace unicat::cli

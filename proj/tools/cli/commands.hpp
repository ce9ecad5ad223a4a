#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "unicat/experiments.hpp"
#include "unicat/fusion.hpp"
#include "unicat/synthdata.hpp"

namespace unicat::cli {

namespace fs = std::filesystem;

// Exit-code contract of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Maps the current exception (call inside a catch block) to an exit code and
// writes a one-line diagnostic.
int exit_code_for_current_exception(std::ostream& err);

// ---- gen ----
// Writes one UCEB file per modality plus manifest.json. Features are stored
// as 32-bit floats.
void cmd_gen(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log);

// Reads a directory written by cmd_gen (features widened back to double).
MultimodalDataset load_dataset_dir(const fs::path& dir);

// ---- train ----
// Trains (or grid-searches when cfg.grid is set) and writes config.json,
// loss.csv and checkpoint.ucck; a grid also writes cells/<cell>/ and
// selection.json. Uses the dataset in `data_dir` when given, otherwise
// generates it from cfg.data.
void cmd_train(const ExperimentConfig& cfg, const fs::path& out,
               const std::optional<fs::path>& data_dir, std::size_t jobs, std::ostream& log);

// ---- eval ----
struct EvalRequest {
  fs::path checkpoint;
  std::optional<fs::path> data_dir;
  bool trainset = false;
};

// Multimodal plus per-stream reports (or per-stream train-set reports with
// `trainset`): summary.csv, per_query.csv, cmc.csv, report.md, config.json.
void cmd_eval(const ExperimentConfig& cfg, const EvalRequest& req, const fs::path& out,
              std::ostream& log);

struct ExternalEvalRequest {
  std::vector<fs::path> queries;   // one file per modality
  std::vector<fs::path> galleries; // aligned with `queries`
  FusionOperator fusion = FusionOperator::Concat;
  bool normalize = true;
  CmcOptions cmc;
};

// Evaluates user-supplied embeddings without a model: one unimodal report
// per (query, gallery) pair and, with two or more pairs, a fused report.
void cmd_eval_external(const ExternalEvalRequest& req, const fs::path& out, std::ostream& log);

// ---- repro ----
struct ReproRequest {
  SuiteConfig suite;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
};

// Runs the suite and writes table.md, table.csv, per_seed.csv, claims.txt
// and config.json. Claims are printed to `log`.
SuiteResult cmd_repro(const ReproRequest& req, const fs::path& out, std::ostream& log);

}  // namespace unicat::cli

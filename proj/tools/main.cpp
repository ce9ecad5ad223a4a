// unicat: synthetic multimodal re-identification experiments.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "unicat/errors.hpp"

namespace {

using namespace unicat;
using namespace unicat::cli;

struct Overrides {
  std::optional<std::string> strategy;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy, "override train.strategy (fusion-avg, fusion-concat, unicat)");
    cmd->add_option("--epochs", epochs, "override train.epochs");
    cmd->add_option("--seed", seed, "override both data.seed and train.seed");
  }

  void apply(ExperimentConfig& cfg) const {
    if (strategy) cfg.train.strategy = parse_strategy(*strategy);
    if (epochs) cfg.train.epochs = *epochs;
    if (seed) {
      cfg.data.seed = *seed;
      cfg.train.seed = *seed;
    }
    validate(cfg.train);
  }
};

ExperimentConfig config_from(const std::optional<std::string>& path, const Overrides& ov) {
  ExperimentConfig cfg = path ? load_config(*path) : parse_config(nlohmann::json::object());
  ov.apply(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unicat: train and evaluate multimodal re-identification strategies on synthetic data"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::string out;
  Overrides ov;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (UCEB files + manifest)");
  gen->add_option("--config", config_path, "JSON config (defaults to the clean preset)");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", ov.seed, "override data.seed");

  auto* trn = app.add_subcommand("train", "train one model, or a grid when the config has one");
  std::optional<std::string> data_dir;
  std::size_t jobs = 1;
  trn->add_option("--config", config_path, "JSON config");
  trn->add_option("--data", data_dir, "dataset directory written by gen (default: generate inline)");
  trn->add_option("--out", out, "output directory")->required();
  trn->add_option("--jobs", jobs, "worker threads for grid cells")->check(CLI::PositiveNumber);
  ov.add_to(trn);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or external embedding files");
  std::optional<std::string> checkpoint;
  bool trainset = false;
  bool external = false;
  std::vector<std::string> queries;
  std::vector<std::string> galleries;
  std::string fusion = "concat";
  std::optional<bool> normalize;
  bool exclude_same_view = false;
  std::size_t max_rank = 50;
  ev->add_option("--config", config_path, "JSON config describing the dataset and eval options");
  ev->add_option("--data", data_dir, "dataset directory written by gen");
  ev->add_option("--checkpoint", checkpoint, "checkpoint.ucck from train");
  ev->add_option("--out", out, "output directory")->required();
  ev->add_flag("--trainset", trainset, "per-stream retrieval on the train identities");
  ev->add_flag("--external", external, "evaluate --query/--gallery embedding files, no model");
  ev->add_option("--query", queries, "query UCEB file (repeat per modality)");
  ev->add_option("--gallery", galleries, "gallery UCEB file (repeat per modality)");
  ev->add_option("--fusion", fusion, "external fusion operator: concat or average");
  ev->add_flag("--normalize,!--no-normalize", normalize, "l2-normalise each modality before fusion");
  ev->add_flag("--exclude-same-view", exclude_same_view, "drop gallery entries with the query's id and view");
  ev->add_option("--max-rank", max_rank, "CMC depth")->check(CLI::PositiveNumber);
  ov.add_to(ev);

  auto* rep = app.add_subcommand("repro", "run a directional experiment suite");
  std::string suite_name;
  std::size_t num_seeds = 5;
  std::optional<std::size_t> suite_epochs;
  rep->add_option("suite", suite_name, "laziness-clean, weak-link, ensemble or train-vs-test")->required();
  rep->add_option("--seeds", num_seeds, "number of seeds (1..N)")->check(CLI::PositiveNumber);
  rep->add_option("--out", out, "output directory")->required();
  rep->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  rep->add_option("--epochs", suite_epochs, "override the suite's training epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      ExperimentConfig cfg = config_path ? load_config(*config_path) : parse_config(nlohmann::json::object());
      if (ov.seed) cfg.data.seed = *ov.seed;
      cmd_gen(cfg, out, std::cout);
    } else if (*trn) {
      cmd_train(config_from(config_path, ov), out, data_dir ? std::optional<fs::path>(*data_dir) : std::nullopt,
                jobs, std::cout);
    } else if (*ev) {
      if (external) {
        if (checkpoint) throw ConfigError("eval: --external does not take a --checkpoint");
        ExternalEvalRequest req;
        req.queries.assign(queries.begin(), queries.end());
        req.galleries.assign(galleries.begin(), galleries.end());
        req.fusion = parse_fusion_operator(fusion);
        req.normalize = normalize.value_or(true);
        req.cmc.exclude_same_view = exclude_same_view;
        req.cmc.max_rank = max_rank;
        cmd_eval_external(req, out, std::cout);
      } else {
        if (!checkpoint) throw ConfigError("eval: --checkpoint is required (or use --external)");
        if (!queries.empty() || !galleries.empty()) {
          throw ConfigError("eval: --query/--gallery need --external");
        }
        ExperimentConfig cfg = config_from(config_path, ov);
        if (normalize) cfg.eval.inference.normalize_before_fusion = *normalize;
        if (exclude_same_view) cfg.eval.cmc.exclude_same_view = true;
        if (ev->count("--max-rank") > 0) cfg.eval.cmc.max_rank = max_rank;
        EvalRequest req;
        req.checkpoint = *checkpoint;
        if (data_dir) req.data_dir = *data_dir;
        req.trainset = trainset;
        cmd_eval(cfg, req, out, std::cout);
      }
    } else if (*rep) {
      ReproRequest req;
      req.suite = default_suite(parse_suite(suite_name));
      if (suite_epochs) {
        req.suite.train.epochs = *suite_epochs;
        if (req.suite.train.warmup_epochs >= *suite_epochs) req.suite.train.warmup_epochs = *suite_epochs / 10;
      }
      for (std::size_t s = 1; s <= num_seeds; ++s) req.seeds.push_back(s);
      req.jobs = jobs;
      cmd_repro(req, out, std::cout);
    }
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
  return kExitOk;
}

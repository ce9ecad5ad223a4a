#include "commands.hpp"

#include <exception>
#include <map>

#include <fmt/core.h>

#include "unicat/errors.hpp"
#include "unicat/evaluate.hpp"
#include "unicat/io.hpp"
#include "unicat/metrics.hpp"
#include "unicat/pipeline.hpp"
#include "unicat/report.hpp"
#include "unicat/rng.hpp"

namespace unicat::cli {

using nlohmann::json;

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

constexpr const char* kManifest = "manifest.json";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

char split_code(Split s) {
  switch (s) {
    case Split::Train: return 't';
    case Split::Query: return 'q';
    case Split::Gallery: return 'g';
  }
  return '?';
}

Split parse_split_code(char c) {
  switch (c) {
    case 't': return Split::Train;
    case 'q': return Split::Query;
    case 'g': return Split::Gallery;
    default: throw FormatError(fmt::format("manifest: unknown split code '{}'", c));
  }
}

std::string loss_csv(const RunRecord& run) {
  std::string out = fmt::format("# config_hash={:016x}\nepoch,lr,loss\n", run.config_hash);
  for (std::size_t e = 0; e < run.epoch_loss.size(); ++e) {
    out += fmt::format("{},{:.17g},{:.17g}\n", e, run.epoch_lr[e], run.epoch_loss[e]);
  }
  return out;
}

void write_run(const fs::path& dir, const RunRecord& run) {
  ensure_dir(dir);
  write_file(dir / "loss.csv", loss_csv(run));
  write_checkpoint(dir / "checkpoint.ucck", run.model, run.class_ids);
}

MultimodalDataset resolve_dataset(const ExperimentConfig& cfg,
                                  const std::optional<fs::path>& data_dir) {
  return data_dir ? load_dataset_dir(*data_dir) : build_dataset(cfg);
}

json source_json(const std::optional<fs::path>& data_dir) {
  if (!data_dir) return "generated";
  const json manifest = json::parse(read_file(*data_dir / kManifest));
  return {{"manifest_config_hash", manifest.at("config_hash")}};
}

std::vector<Label> ids_with_split(const MultimodalDataset& ds, Split s) {
  std::vector<Label> out;
  for (std::size_t r : ds.indices(s)) out.push_back(ds.ids[r]);
  return out;
}

void write_reports(const fs::path& out, const std::vector<NamedReport>& reports,
                   std::uint64_t hash, const std::string& title) {
  write_file(out / "summary.csv", summary_csv(reports, hash));
  write_file(out / "per_query.csv", per_query_csv(reports, hash));
  write_file(out / "cmc.csv", cmc_csv(reports, hash));
  write_file(out / "report.md", reports_markdown(reports, title));
}

void log_reports(std::ostream& log, const std::vector<NamedReport>& reports) {
  for (const auto& r : reports) {
    log << fmt::format("{:<14} {:<8} mAP {:5.1f}  Rank-1 {:5.1f}\n", r.evaluated, r.split,
                       100.0 * r.report.mAP, 100.0 * r.report.rank1);
  }
}

void check_compatible(const ModelParams& model, const MultimodalDataset& ds) {
  if (model.streams.size() != ds.num_modalities()) {
    throw ShapeError(fmt::format("eval: checkpoint has {} streams but the dataset has {} modalities",
                                 model.streams.size(), ds.num_modalities()));
  }
  for (std::size_t i = 0; i < ds.num_modalities(); ++i) {
    if (model.streams[i].input_dim() != ds.features[i].cols()) {
      throw ShapeError(fmt::format(
          "eval: stream {} ('{}') expects {}-dim input but modality '{}' has {} columns", i,
          model.streams[i].name, model.streams[i].input_dim(), ds.modality_names[i],
          ds.features[i].cols()));
    }
  }
}

}  // namespace

void cmd_gen(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  const MultimodalDataset ds = build_dataset(cfg);
  ensure_dir(out);
  const json canonical = to_json(cfg);
  const std::uint64_t hash = config_hash(canonical);

  json mods = json::array();
  for (std::size_t m = 0; m < ds.num_modalities(); ++m) {
    EmbeddingFile f;
    f.modality = ds.modality_names[m];
    f.features = ds.features[m];
    f.ids = ds.ids;
    f.view_ids = ds.view_ids;
    const std::string file = fmt::format("modality_{}.uceb", m);
    write_embedding_file(out / file, f);
    mods.push_back({{"name", f.modality}, {"file", file}, {"dim", f.features.cols()}});
  }
  std::string split;
  split.reserve(ds.num_samples());
  for (Split s : ds.split) split.push_back(split_code(s));
  write_json(out / kManifest, {{"format", "unicat-dataset"},
                               {"version", 1},
                               {"config_hash", hash_hex(hash)},
                               {"config", canonical},
                               {"num_samples", ds.num_samples()},
                               {"modalities", mods},
                               {"split", split}});
  log << fmt::format("wrote {} modalities x {} samples to {}\n", ds.num_modalities(),
                     ds.num_samples(), out.string());
}

MultimodalDataset load_dataset_dir(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / kManifest));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("manifest: {}", e.what()));
  }
  try {
    if (manifest.at("format") != "unicat-dataset" || manifest.at("version") != 1) {
      throw FormatError("manifest: not a version 1 unicat dataset");
    }
    const auto split = manifest.at("split").get<std::string>();
    MultimodalDataset ds;
    for (const auto& m : manifest.at("modalities")) {
      EmbeddingFile f = read_embedding_file(dir / m.at("file").get<std::string>());
      if (ds.features.empty()) {
        ds.ids = f.ids;
        ds.view_ids = f.view_ids;
      } else if (f.ids != ds.ids || f.view_ids != ds.view_ids) {
        throw DataError(fmt::format("dataset: modality '{}' is not row-aligned with the first",
                                    f.modality));
      }
      ds.modality_names.push_back(f.modality);
      ds.features.push_back(std::move(f.features));
    }
    if (ds.features.empty()) throw FormatError("manifest: no modalities");
    if (split.size() != ds.ids.size()) {
      throw FormatError(fmt::format("manifest: split has {} entries for {} samples", split.size(),
                                    ds.ids.size()));
    }
    for (char c : split) ds.split.push_back(parse_split_code(c));
    validate(ds);
    return ds;
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("manifest: {}", e.what()));
  }
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& out,
               const std::optional<fs::path>& data_dir, std::size_t jobs, std::ostream& log) {
  const MultimodalDataset ds = resolve_dataset(cfg, data_dir);
  ensure_dir(out);
  const json canonical = to_json(cfg);
  const std::uint64_t hash = config_hash(canonical);
  write_json(out / "config.json",
             {{"config", canonical}, {"config_hash", hash_hex(hash)}, {"dataset", source_json(data_dir)}});

  if (!cfg.grid) {
    const RunRecord run = train(ds, cfg.train);
    write_run(out, run);
    log << fmt::format("trained {} for {} epochs, final loss {:.4f}\n", to_string(cfg.train.strategy),
                       run.epoch_loss.size(), run.epoch_loss.back());
    return;
  }

  GridSpec spec;
  spec.batch_sizes = cfg.grid->batch_sizes;
  spec.learning_rates = cfg.grid->learning_rates;
  spec.validation_fraction = cfg.grid->validation_fraction;
  spec.validation_query_views = cfg.grid->validation_query_views;
  spec.eval = cfg.eval;
  const GridResult grid = grid_search(ds, cfg.train, spec, jobs);

  json cells = json::array();
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const GridCell& c = grid.cells[i];
    const std::string name = fmt::format("bs{}_lr{}", c.batch_size, c.lr);
    write_run(out / "cells" / name, c.run);
    cells.push_back({{"dir", "cells/" + name},
                     {"batch_size", c.batch_size},
                     {"lr", c.lr},
                     {"validation_map", c.validation_map}});
    log << fmt::format("cell {:<18} validation mAP {:.4f}\n", name, c.validation_map);
  }
  const GridCell& best = grid.cells[grid.best];
  write_json(out / "selection.json", {{"config_hash", hash_hex(hash)},
                                      {"criterion", "validation multimodal mAP"},
                                      {"tie_break", "lower lr, then smaller batch"},
                                      {"best", grid.best},
                                      {"best_dir", cells[grid.best]["dir"]},
                                      {"cells", cells}});
  write_run(out, grid.best_run());
  log << fmt::format("selected batch {} lr {} (validation mAP {:.4f})\n", best.batch_size, best.lr,
                     best.validation_map);
}

void cmd_eval(const ExperimentConfig& cfg, const EvalRequest& req, const fs::path& out,
              std::ostream& log) {
  const Checkpoint ck = read_checkpoint(req.checkpoint);
  const MultimodalDataset ds = resolve_dataset(cfg, req.data_dir);
  check_compatible(ck.model, ds);

  std::vector<NamedReport> reports;
  if (req.trainset) {
    for (std::size_t i = 0; i < ds.num_modalities(); ++i) {
      reports.push_back({ds.modality_names[i], "train",
                         eval_trainset(ck.model, ds, i, cfg.trainset_query_views, cfg.data.seed,
                                       cfg.eval),
                         {}});
    }
  } else {
    const std::vector<Label> qids = ids_with_split(ds, Split::Query);
    reports.push_back({"multimodal", "test", eval_multimodal(ck.model, ds, cfg.eval), qids});
    for (std::size_t i = 0; i < ds.num_modalities(); ++i) {
      reports.push_back({ds.modality_names[i], "test", eval_unimodal(ck.model, ds, i, cfg.eval), qids});
    }
  }

  const json canonical = to_json(cfg);
  const std::string ck_bytes = read_file(req.checkpoint);
  const std::uint64_t hash =
      fnv1a64(fmt::format("{}|{:016x}|{}", canonical.dump(), fnv1a64(ck_bytes), req.trainset));
  ensure_dir(out);
  write_json(out / "config.json", {{"config", canonical},
                                   {"config_hash", hash_hex(hash)},
                                   {"checkpoint_fnv1a64", hash_hex(fnv1a64(ck_bytes))},
                                   {"strategy", std::string(to_string(ck.model.strategy))},
                                   {"mode", req.trainset ? "trainset" : "test"},
                                   {"dataset", source_json(req.data_dir)}});
  write_reports(out, reports, hash,
                fmt::format("{} ({})", to_string(ck.model.strategy),
                            req.trainset ? "train-set retrieval" : "test retrieval"));
  log_reports(log, reports);
}

void cmd_eval_external(const ExternalEvalRequest& req, const fs::path& out, std::ostream& log) {
  if (req.queries.empty() || req.queries.size() != req.galleries.size()) {
    throw ConfigError("eval --external: give one or more --query/--gallery pairs");
  }
  std::vector<EmbeddingSet> qs;
  std::vector<EmbeddingSet> gs;
  std::vector<std::string> names;
  std::string fingerprint = fmt::format("fusion={};normalize={};exclude={};max_rank={}",
                                        to_string(req.fusion), req.normalize,
                                        req.cmc.exclude_same_view, req.cmc.max_rank);
  std::map<std::string, std::size_t> name_count;
  for (std::size_t i = 0; i < req.queries.size(); ++i) {
    const std::string qb = read_file(req.queries[i]);
    const std::string gb = read_file(req.galleries[i]);
    fingerprint += fmt::format("|{:016x}:{:016x}", fnv1a64(qb), fnv1a64(gb));
    const EmbeddingFile q = decode_embedding_file(qb);
    const EmbeddingFile g = decode_embedding_file(gb);
    if (q.features.cols() != g.features.cols()) {
      throw ShapeError(fmt::format("eval --external: pair {} has query dim {} but gallery dim {}", i,
                                   q.features.cols(), g.features.cols()));
    }
    std::string name = q.modality.empty() ? fmt::format("modality_{}", i) : q.modality;
    if (name_count[name]++ > 0) name = fmt::format("{}#{}", name, name_count[name] - 1);
    names.push_back(std::move(name));
    qs.push_back(to_embedding_set(q, Split::Query));
    gs.push_back(to_embedding_set(g, Split::Gallery));
  }

  std::vector<NamedReport> reports;
  if (qs.size() > 1) {
    for (std::size_t i = 1; i < qs.size(); ++i) {
      if (qs[i].ids != qs[0].ids || qs[i].view_ids != qs[0].view_ids ||
          gs[i].ids != gs[0].ids || gs[i].view_ids != gs[0].view_ids) {
        throw DataError(fmt::format(
            "eval --external: files of pair {} are not row-aligned with pair 0 (same ids and views "
            "in the same order are required for fusion)", i));
      }
    }
    std::vector<Matrix> qf;
    std::vector<Matrix> gf;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      qf.push_back(qs[i].features);
      gf.push_back(gs[i].features);
    }
    EmbeddingSet fq = qs[0];
    EmbeddingSet fg = gs[0];
    fq.features = fuse(qf, req.fusion, req.normalize);
    fg.features = fuse(gf, req.fusion, req.normalize);
    reports.push_back({"multimodal", "external", evaluate_retrieval(fq, fg, req.cmc), fq.ids});
  }
  for (std::size_t i = 0; i < qs.size(); ++i) {
    reports.push_back({names[i], "external", evaluate_retrieval(qs[i], gs[i], req.cmc), qs[i].ids});
  }

  const std::uint64_t hash = fnv1a64(fingerprint);
  ensure_dir(out);
  json files = json::array();
  for (std::size_t i = 0; i < req.queries.size(); ++i) {
    files.push_back({{"name", names[i]},
                     {"query", req.queries[i].filename().string()},
                     {"gallery", req.galleries[i].filename().string()}});
  }
  write_json(out / "config.json", {{"config_hash", hash_hex(hash)},
                                   {"mode", "external"},
                                   {"fusion", std::string(to_string(req.fusion))},
                                   {"normalize_before_fusion", req.normalize},
                                   {"exclude_same_view", req.cmc.exclude_same_view},
                                   {"max_rank", req.cmc.max_rank},
                                   {"files", files}});
  write_reports(out, reports, hash, "external embeddings");
  log_reports(log, reports);
}

SuiteResult cmd_repro(const ReproRequest& req, const fs::path& out, std::ostream& log) {
  SuiteResult result = run_suite(req.suite, req.seeds, req.jobs);
  json canonical = to_json(req.suite);
  canonical["seeds"] = req.seeds;
  const std::uint64_t hash = config_hash(canonical);
  ensure_dir(out);
  write_json(out / "config.json", {{"config", canonical}, {"config_hash", hash_hex(hash)}});
  write_file(out / "table.md", table_markdown(result.table));
  write_file(out / "table.csv", table_csv(result.table, hash));
  write_file(out / "per_seed.csv", per_seed_csv(result, hash));
  const std::string claims = claims_text(result.claims);
  write_file(out / "claims.txt", claims);
  log << table_markdown(result.table) << "\n" << claims;
  return result;
}

}  // namespace unicat::cli

#include "unicat/report.hpp"

#include <fmt/core.h>

namespace unicat {

namespace {

std::string csv_preamble(std::uint64_t config_hash, const char* header) {
  return fmt::format("# config_hash={:016x}\n{}\n", config_hash, header);
}

std::string pct(double v) { return fmt::format("{:.1f}", 100.0 * v); }

std::string pct_pm(double mean, double sd) {
  return fmt::format("{:.1f} ± {:.1f}", 100.0 * mean, 100.0 * sd);
}

std::string column_label(const TableColumn& c) {
  if (c.split == "test") return c.evaluated;
  return fmt::format("{} ({})", c.evaluated, c.split);
}

}  // namespace

std::string summary_csv(std::span<const NamedReport> reports, std::uint64_t config_hash) {
  std::string out = csv_preamble(config_hash,
                                 "evaluated,split,mAP,rank1,num_queries,num_scored,num_skipped");
  for (const auto& r : reports) {
    out += fmt::format("{},{},{:.8f},{:.8f},{},{},{}\n", r.evaluated, r.split, r.report.mAP,
                       r.report.rank1, r.report.num_queries, r.report.scored_queries.size(),
                       r.report.num_skipped_queries);
  }
  return out;
}

std::string per_query_csv(std::span<const NamedReport> reports, std::uint64_t config_hash) {
  std::string out = csv_preamble(config_hash, "evaluated,split,query_index,id,ap");
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.report.scored_queries.size(); ++k) {
      const std::size_t q = r.report.scored_queries[k];
      const std::string id = q < r.query_ids.size() ? fmt::format("{}", r.query_ids[q]) : "";
      out += fmt::format("{},{},{},{},{:.8f}\n", r.evaluated, r.split, q, id,
                         r.report.per_query_ap[k]);
    }
  }
  return out;
}

std::string cmc_csv(std::span<const NamedReport> reports, std::uint64_t config_hash) {
  std::string out = csv_preamble(config_hash, "evaluated,split,rank,cmc");
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.report.cmc.size(); ++k) {
      out += fmt::format("{},{},{},{:.8f}\n", r.evaluated, r.split, k + 1, r.report.cmc[k]);
    }
  }
  return out;
}

std::string reports_markdown(std::span<const NamedReport> reports, const std::string& title) {
  std::string out = fmt::format("## {}\n\n| Evaluated | Split | mAP | Rank-1 |\n|---|---|---|---|\n",
                                title);
  for (const auto& r : reports) {
    out += fmt::format("| {} | {} | {} | {} |\n", r.evaluated, r.split, pct(r.report.mAP),
                       pct(r.report.rank1));
  }
  return out;
}

std::string table_markdown(const ExperimentTable& table) {
  std::string out = fmt::format("## {} ({} seed{})\n\n", table.suite, table.seeds.size(),
                                table.seeds.size() == 1 ? "" : "s");
  std::string head = "| Strategy |";
  std::string sub = "|  |";
  std::string rule = "|---|";
  for (const auto& c : table.columns) {
    head += fmt::format(" {} | |", column_label(c));
    sub += " mAP | Rank-1 |";
    rule += "---|---|";
  }
  out += head + "\n" + rule + "\n" + sub + "\n";
  std::size_t i = 0;
  for (Strategy st : table.strategies) {
    std::string line = fmt::format("| {} |", to_string(st));
    for (std::size_t c = 0; c < table.columns.size(); ++c, ++i) {
      const TableRow& row = table.rows.at(i);
      line += fmt::format(" {} | {} |", pct_pm(row.map_mean, row.map_std),
                          pct_pm(row.rank1_mean, row.rank1_std));
    }
    out += line + "\n";
  }
  return out;
}

std::string table_csv(const ExperimentTable& table, std::uint64_t config_hash) {
  std::string out = csv_preamble(
      config_hash, "suite,strategy,evaluated,split,map_mean,map_std,rank1_mean,rank1_std,seeds");
  for (const auto& r : table.rows) {
    out += fmt::format("{},{},{},{},{:.8f},{:.8f},{:.8f},{:.8f},{}\n", table.suite,
                       to_string(r.strategy), r.evaluated, r.split, r.map_mean, r.map_std,
                       r.rank1_mean, r.rank1_std, r.num_seeds);
  }
  return out;
}

std::string per_seed_csv(const SuiteResult& result, std::uint64_t config_hash) {
  std::string out = csv_preamble(config_hash, "seed,strategy,evaluated,split,mAP,rank1");
  for (const auto& c : result.cells) {
    out += fmt::format("{},{},{},{},{:.8f},{:.8f}\n", c.seed, to_string(c.strategy), c.evaluated,
                       c.split, c.mAP, c.rank1);
  }
  return out;
}

std::string claims_text(std::span<const ClaimResult> claims) {
  std::string out;
  for (const auto& c : claims) {
    out += fmt::format("{} {} {}/{} seeds (need {}): {}\n", c.pass ? "PASS" : "FAIL", c.name,
                       c.seeds_passed, c.seeds_total, c.seeds_required, c.description);
  }
  return out;
}

}  // namespace unicat

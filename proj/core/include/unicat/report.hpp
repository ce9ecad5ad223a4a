#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unicat/experiments.hpp"
#include "unicat/metrics.hpp"

namespace unicat {

// One retrieval report with the names it is filed under.
struct NamedReport {
  std::string evaluated;  // stream name or "multimodal"
  std::string split;      // "test", "train" or "external"
  RetrievalReport report;
  // Identity of each query row, for the per-query CSV (may be empty).
  std::vector<Label> query_ids;
};

// Every CSV starts with "# config_hash=<16 hex digits>" followed by a header
// row. Floating-point values are printed with fixed precision so identical
// inputs give identical bytes.
std::string summary_csv(std::span<const NamedReport> reports, std::uint64_t config_hash);
std::string per_query_csv(std::span<const NamedReport> reports, std::uint64_t config_hash);
std::string cmc_csv(std::span<const NamedReport> reports, std::uint64_t config_hash);
// mAP and Rank-1 per evaluated entry, in percent with one decimal.
std::string reports_markdown(std::span<const NamedReport> reports, const std::string& title);

// One row per strategy, an (mAP, Rank-1) column pair per table column,
// "mean ± std" in percent with one decimal.
std::string table_markdown(const ExperimentTable& table);
std::string table_csv(const ExperimentTable& table, std::uint64_t config_hash);
std::string per_seed_csv(const SuiteResult& result, std::uint64_t config_hash);
// "PASS <name> <passed>/<total> seeds (need <required>): <description>" per claim.
std::string claims_text(std::span<const ClaimResult> claims);

}  // namespace unicat

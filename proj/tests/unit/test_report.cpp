#include <gtest/gtest.h>

#include "unicat/errors.hpp"
#include "unicat/experiments.hpp"
#include "unicat/report.hpp"

using namespace unicat;

namespace {

SuiteConfig tiny_suite(SuiteKind kind) {
  SuiteConfig s = default_suite(kind);
  s.data.ids_train = 8;
  s.data.ids_test = 4;
  s.data.views_per_id = 4;
  s.data.query_views = 1;
  s.data.latent_dim = 8;
  s.train.P = 4;
  s.train.K = 2;
  s.train.epochs = 2;
  s.train.warmup_epochs = 1;
  s.train.arch.hidden = {8};
  s.train.arch.embed_dim = 4;
  return s;
}

}  // namespace

TEST(Suite, RequiredSeeds) {
  EXPECT_EQ(required_seeds(5), 4u);
  EXPECT_EQ(required_seeds(1), 1u);
  EXPECT_EQ(required_seeds(3), 3u);
  EXPECT_EQ(required_seeds(10), 8u);
}

TEST(Suite, NamesRoundTrip) {
  for (SuiteKind k : {SuiteKind::LazinessClean, SuiteKind::WeakLink, SuiteKind::Ensemble,
                      SuiteKind::TrainVsTest})
    EXPECT_EQ(parse_suite(to_string(k)), k);
  EXPECT_THROW(parse_suite("tables"), ConfigError);
}

TEST(Suite, SingleSeedHasZeroStd) {
  const std::vector<std::uint64_t> seeds{3};
  const SuiteResult r = run_suite(tiny_suite(SuiteKind::LazinessClean), seeds);
  ASSERT_FALSE(r.table.rows.empty());
  for (const TableRow& row : r.table.rows) {
    EXPECT_EQ(row.map_std, 0.0);
    EXPECT_EQ(row.num_seeds, 1u);
  }
  ASSERT_EQ(r.claims.size(), 1u);
  EXPECT_EQ(r.claims[0].seeds_total, 1u);
}

TEST(Suite, JobsDoNotChangeResults) {
  const std::vector<std::uint64_t> seeds{1, 2};
  const SuiteResult a = run_suite(tiny_suite(SuiteKind::Ensemble), seeds, 1);
  const SuiteResult b = run_suite(tiny_suite(SuiteKind::Ensemble), seeds, 3);
  EXPECT_EQ(per_seed_csv(a, 1), per_seed_csv(b, 1));
  EXPECT_EQ(table_markdown(a.table), table_markdown(b.table));
}

TEST(Suite, TrainVsTestReportsBothSplits) {
  const std::vector<std::uint64_t> seeds{1};
  const SuiteResult r = run_suite(tiny_suite(SuiteKind::TrainVsTest), seeds);
  bool train = false, test = false;
  for (const SuiteCell& c : r.cells) {
    train |= c.split == "train";
    test |= c.split == "test";
  }
  EXPECT_TRUE(train && test);
}

TEST(Suite, CacheSharesIdenticalRuns) {
  TrainCache cache;
  const std::vector<std::uint64_t> seeds{1};
  run_suite(tiny_suite(SuiteKind::LazinessClean), seeds, 1, &cache);
  EXPECT_EQ(cache.size(), 3u);
  run_suite(tiny_suite(SuiteKind::TrainVsTest), seeds, 1, &cache);
  EXPECT_EQ(cache.size(), 3u);
}

TEST(Report, TableAggregatesMeanAndSampleStd) {
  ExperimentTable t;
  t.suite = "x";
  t.strategies = {Strategy::UniCat};
  t.columns = {{"rgb", "test"}};
  TableRow row;
  row.evaluated = "rgb";
  row.split = "test";
  row.map_mean = 0.5;
  row.map_std = 0.0125;
  row.rank1_mean = 0.75;
  row.num_seeds = 2;
  t.rows = {row};
  const std::string md = table_markdown(t);
  EXPECT_NE(md.find("50.0 ± 1.2"), std::string::npos) << md;
  EXPECT_NE(md.find("75.0 ± 0.0"), std::string::npos) << md;
}

TEST(Report, CsvHeaderCarriesHash) {
  RetrievalReport rep;
  rep.mAP = 0.25;
  rep.rank1 = 0.5;
  rep.cmc = {0.5, 1.0};
  rep.per_query_ap = {0.25};
  rep.scored_queries = {0};
  rep.num_queries = 1;
  const std::vector<NamedReport> reports{{"multimodal", "test", rep, {7}}};
  const std::string s = summary_csv(reports, 0x1234);
  EXPECT_EQ(s.rfind("# config_hash=0000000000001234\n", 0), 0u);
  EXPECT_NE(s.find("0.25000000"), std::string::npos);
  EXPECT_NE(per_query_csv(reports, 1).find(",7,"), std::string::npos);
}

TEST(Report, ClaimsText) {
  ClaimResult c;
  c.name = "demo";
  c.description = "a beats b";
  c.seeds_passed = 4;
  c.seeds_total = 5;
  c.seeds_required = 4;
  c.pass = true;
  const std::vector<ClaimResult> claims{c};
  EXPECT_EQ(claims_text(claims), "PASS demo 4/5 seeds (need 4): a beats b\n");
}

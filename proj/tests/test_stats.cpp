#include <gtest/gtest.h>

#include "oracles.hpp"
#include "triage/error.hpp"
#include "triage/stats/tests.hpp"

namespace triage::stats {
namespace {

std::vector<LiftRow> rows_from(const std::vector<std::pair<std::vector<std::string>,
                                                           std::vector<std::string>>>& v) {
  std::vector<LiftRow> rows;
  for (const auto& [cc, t] : v) rows.push_back({cc, t});
  return rows;
}

TEST(Lift, TargetInEveryRowHasLiftOne) {
  const auto rows = rows_from({{{"a"}, {"t"}}, {{"b"}, {"t", "u"}}, {{"a", "b"}, {"t"}}});
  const LiftTable table = bayesian_lift(rows);
  EXPECT_DOUBLE_EQ(table.find("t", "a")->lift, 1.0);
  EXPECT_DOUBLE_EQ(table.find("t", "b")->lift, 1.0);
}

TEST(Lift, TenRowCountingExample) {
  // N = 10, count(c) = 4, count(t) = 2, count(t and c) = 2.
  std::vector<LiftRow> rows(10);
  for (int i = 0; i < 4; ++i) rows[i].chief_complaints = {"c"};
  rows[0].targets = {"t"};
  rows[1].targets = {"t"};
  for (int i = 4; i < 10; ++i) rows[i].chief_complaints = {"other"};
  const LiftEntry* e = bayesian_lift(rows).find("t", "c");
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->joint, 2);
  EXPECT_EQ(e->cc_count, 4);
  EXPECT_EQ(e->target_count, 2);
  EXPECT_DOUBLE_EQ(e->lift, (2.0 / 4.0) / (2.0 / 10.0));
  EXPECT_DOUBLE_EQ(e->lift, 2.5);
}

TEST(Lift, NeverCoOccurringIsZero) {
  const auto rows = rows_from({{{"a"}, {"t"}}, {{"b"}, {}}});
  EXPECT_EQ(bayesian_lift(rows).find("t", "b")->lift, 0.0);
}

TEST(Lift, DuplicatesInRowCountOnce) {
  const auto rows = rows_from({{{"a", "a"}, {"t", "t"}}, {{"b"}, {}}});
  const LiftEntry* e = bayesian_lift(rows).find("t", "a");
  EXPECT_EQ(e->joint, 1);
  EXPECT_EQ(e->cc_count, 1);
  EXPECT_EQ(e->target_count, 1);
}

TEST(Lift, MatchesBruteForceOnRandomTables) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = oracle::random_lift_rows(rng, 5 + trial * 5, 3, 4);
    const LiftTable table = bayesian_lift(rows);
    const auto expect = oracle::brute_lift(rows);
    std::size_t present = 0;
    for (const auto& [key, k] : expect) {
      if (k.cc == 0 || k.target == 0) continue;
      ++present;
      const LiftEntry* e = table.find(key.first, key.second);
      ASSERT_NE(e, nullptr);
      EXPECT_EQ(e->joint, k.joint);
      EXPECT_EQ(e->lift, oracle::lift_of(k, table.n_rows));
    }
    EXPECT_EQ(table.entries.size(), present);
  }
}

TEST(Filter, LiftOfExactlyTwoIsExcluded) {
  std::vector<LiftRow> rows(8);
  for (int i = 0; i < 4; ++i) rows[i].chief_complaints = {"c"};
  rows[0].targets = {"t"};
  rows[1].targets = {"t"};
  rows[4].targets = {"t"};
  rows[5].targets = {"t"};
  const LiftTable table = bayesian_lift(rows);
  ASSERT_EQ(table.find("t", "c")->lift, 1.0);
  // (2/4) / (4/8) = 1; add the rows where (1/3)/(1/6) = 2 exactly.
  std::vector<LiftRow> r2(6);
  for (int i = 0; i < 3; ++i) r2[i].chief_complaints = {"c"};
  r2[0].targets = {"t"};
  const LiftTable t2 = bayesian_lift(r2);
  EXPECT_EQ(t2.find("t", "c")->lift, 2.0);
  EXPECT_TRUE(filter_targets(t2, 2.0, 1).empty());
  EXPECT_EQ(filter_targets(t2, 1.9, 1).size(), 1u);
}

TEST(Filter, JointCountBelowMinimumIsExcluded) {
  LiftTable table;
  table.n_rows = 10000;
  table.entries[{"t", "c"}] = LiftEntry{2.5, 99, 396, 1010};
  EXPECT_TRUE(filter_targets(table, 2.0, 100).empty());
  table.entries[{"t", "c"}].joint = 100;
  table.entries[{"t", "c"}].cc_count = 400;
  EXPECT_EQ(filter_targets(table, 2.0, 100).size(), 1u);
}

TEST(Filter, EmptyTableAndBadThreshold) {
  EXPECT_TRUE(filter_targets(LiftTable{}, 2.0, 1).empty());
  EXPECT_THROW(filter_targets(LiftTable{}, 0.0, 1), ValidationError);
}

TEST(Filter, MatchesIntegerOracleOnRandomTables) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = oracle::random_lift_rows(rng, 6 + trial, 3, 3);
    const LiftTable table = bayesian_lift(rows);
    TargetSet expect;
    for (const auto& [key, k] : oracle::brute_lift(rows)) {
      if (k.cc > 0 && k.target > 0 && oracle::lift_exceeds(k, table.n_rows, 2, 1) &&
          k.joint >= 2) {
        expect.insert(key);
      }
    }
    EXPECT_EQ(filter_targets(table, 2.0, 2), expect) << trial;
  }
}

TEST(Metrics, HandFixtures) {
  for (const auto& f : oracle::metric_fixtures()) {
    const RankMetrics m = rank_metrics(f.scores, f.truth);
    EXPECT_NEAR(m.micro_pr_auc, f.pr_auc, 1e-9) << f.name;
    EXPECT_NEAR(m.micro_roc_auc, f.roc_auc, 1e-9) << f.name;
    EXPECT_NEAR(m.ndcg, f.ndcg, 1e-9) << f.name;
  }
}

TEST(Metrics, NdcgExampleValue) {
  const RankMetrics m = rank_metrics({{0.9, 0.8, 0.1}}, {{1, 0, 1}});
  EXPECT_NEAR(m.ndcg, 0.9197, 1e-4);
}

TEST(Metrics, NdcgCutoff) {
  const std::vector<double> s{0.9, 0.8, 0.1};
  const std::vector<char> y{1, 0, 1};
  EXPECT_DOUBLE_EQ(*ndcg(s, y, 1), 1.0);
  EXPECT_NEAR(*ndcg(s, y, 2), 1.0 / (1.0 + 1.0 / std::log2(3.0)), 1e-12);
  EXPECT_EQ(ndcg(s, std::vector<char>{0, 0, 0}), std::nullopt);
}

TEST(Metrics, RocMatchesPairCounting) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(60);
    std::vector<char> y(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 10.0;  // many ties
      y[i] = static_cast<char>(rng() % 3 == 0);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(roc_auc(s, y), oracle::pairwise_roc(s, y), 1e-12);
  }
}

TEST(Metrics, RandomScoresGiveHalfRoc) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreMatrix s(400, std::vector<double>(2));
  TruthMatrix t(400, std::vector<char>(2));
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int j = 0; j < 2; ++j) {
      s[i][j] = u(rng);
      t[i][j] = static_cast<char>(u(rng) < 0.5);
    }
  }
  EXPECT_NEAR(rank_metrics(s, t).micro_roc_auc, 0.5, 0.02);
}

TEST(Metrics, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    ScoreMatrix s(10, std::vector<double>(5));
    ScoreMatrix s2 = s;
    TruthMatrix t(10, std::vector<char>(5));
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (int j = 0; j < 5; ++j) {
        s[i][j] = u(rng);
        s2[i][j] = std::exp(3.0 * s[i][j]) - 7.0;
        t[i][j] = static_cast<char>(u(rng) < 0.3);
      }
    }
    t[0][0] = 1;
    t[0][1] = 0;
    const RankMetrics a = rank_metrics(s, t);
    const RankMetrics b = rank_metrics(s2, t);
    EXPECT_DOUBLE_EQ(a.micro_pr_auc, b.micro_pr_auc);
    EXPECT_DOUBLE_EQ(a.micro_roc_auc, b.micro_roc_auc);
    EXPECT_DOUBLE_EQ(a.ndcg, b.ndcg);
  }
}

TEST(Metrics, ErrorsOnShapeAndDegenerateLabels) {
  EXPECT_THROW(rank_metrics({{0.1, 0.2}}, {{1}}), ShapeError);
  EXPECT_THROW(rank_metrics({{0.1, 0.2}}, {{0, 0}}), UndefinedMetricError);
  EXPECT_THROW(rank_metrics({{0.1, 0.2}}, {{1, 1}}), UndefinedMetricError);
}

TEST(SignTest, ExactBinomialTail) {
  EXPECT_NEAR(sign_test_p(10, 0), 1.0 / 1024.0, 1e-15);
  EXPECT_NEAR(sign_test_p(9, 1), 11.0 / 1024.0, 1e-15);
  EXPECT_NEAR(sign_test_p(0, 3), 1.0, 1e-15);
  EXPECT_NEAR(sign_test_p(2, 2), 11.0 / 16.0, 1e-15);
}

}  // namespace
}  // namespace triage::stats

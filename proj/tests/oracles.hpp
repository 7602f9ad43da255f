#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. None of them call into the code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "triage/forest/forest.hpp"
#include "triage/stats/lift.hpp"
#include "triage/stats/metrics.hpp"

namespace triage::oracle {

// ---- lift ----------------------------------------------------------------

struct LiftCounts {
  std::int64_t joint = 0;
  std::int64_t cc = 0;
  std::int64_t target = 0;
};

inline bool row_has(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// One pass over the rows per (t, c) pair.
inline std::map<std::pair<std::string, std::string>, LiftCounts> brute_lift(
    const std::vector<stats::LiftRow>& rows) {
  std::set<std::string> ts;
  std::set<std::string> cs;
  for (const auto& r : rows) {
    ts.insert(r.targets.begin(), r.targets.end());
    cs.insert(r.chief_complaints.begin(), r.chief_complaints.end());
  }
  std::map<std::pair<std::string, std::string>, LiftCounts> out;
  for (const auto& t : ts) {
    for (const auto& c : cs) {
      LiftCounts k;
      for (const auto& r : rows) {
        const bool has_t = row_has(r.targets, t);
        const bool has_c = row_has(r.chief_complaints, c);
        k.target += has_t;
        k.cc += has_c;
        k.joint += has_t && has_c;
      }
      out[{t, c}] = k;
    }
  }
  return out;
}

inline double lift_of(const LiftCounts& k, std::int64_t n) {
  return (static_cast<double>(k.joint) / static_cast<double>(k.cc)) /
         (static_cast<double>(k.target) / static_cast<double>(n));
}

// lift > num/den decided in integers.
inline bool lift_exceeds(const LiftCounts& k, std::int64_t n, std::int64_t num,
                         std::int64_t den) {
  return k.joint * n * den > num * k.cc * k.target;
}

// Small vocabularies make lifts of exactly 2 common.
inline std::vector<stats::LiftRow> random_lift_rows(std::mt19937_64& rng, int n_rows,
                                                    int n_cc, int n_targets) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<stats::LiftRow> rows(n_rows);
  for (auto& r : rows) {
    for (int c = 0; c < n_cc; ++c) {
      if (u(rng) < 0.35) r.chief_complaints.push_back("cc" + std::to_string(c));
    }
    for (int t = 0; t < n_targets; ++t) {
      if (u(rng) < 0.3) r.targets.push_back("t" + std::to_string(t));
    }
    if (u(rng) < 0.1 && !r.targets.empty()) r.targets.push_back(r.targets.front());
  }
  return rows;
}

// ---- ranking metrics -----------------------------------------------------

struct MetricFixture {
  std::string name;
  stats::ScoreMatrix scores;
  stats::TruthMatrix truth;
  double pr_auc;
  double roc_auc;
  double ndcg;
};

// Expected values worked out by hand; tied scores rank negatives first for
// nDCG and share credit for ROC-AUC.
inline std::vector<MetricFixture> metric_fixtures() {
  const double l3 = 1.0 / std::log2(3.0);
  const double l5 = 1.0 / std::log2(5.0);
  return {
      // DCG = 1 + 1/log2(4), IDCG = 1 + 1/log2(3).
      {"three_labels", {{0.9, 0.8, 0.1}}, {{1, 0, 1}}, 5.0 / 6.0, 0.5, 1.5 / (1.0 + l3)},
      {"perfect", {{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}, 1.0, 1.0, 1.0},
      // One tie group of negatives above one of positives.
      {"anti_perfect", {{0, 1}, {1, 0}}, {{1, 0}, {0, 1}}, 0.5, 0.0, l3},
      // Ranking -,+ (tied at 0.5), -, +.
      {"tied_scores", {{0.5, 0.5, 0.2, 0.1}}, {{1, 0, 0, 1}}, 0.5, 0.375,
       (l3 + l5) / (1.0 + l3)},
      // Pooled: - + - + - +, so U = 2 + 1 + 0 over 9 pairs.
      {"two_instances",
       {{0.3, 0.7, 0.6}, {0.2, 0.4, 0.9}},
       {{0, 1, 0}, {1, 1, 0}},
       0.5,
       1.0 / 3.0,
       (1.0 + (l3 + 0.5) / (1.0 + l3)) / 2.0},
  };
}

// O(P*N) pair counting.
inline double pairwise_roc(const std::vector<double>& s, const std::vector<char>& y) {
  double u = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      u += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return u / pairs;
}

// ---- forest voting -------------------------------------------------------

// Recursive walk: the unanswered concept feature the tree stops at, or -1.
inline int naive_stop_feature(const forest::DecisionTree& t, int node,
                              const forest::EncodedRow& row) {
  const forest::TreeNode& n = t.nodes[node];
  if (n.feature < 0) return -1;
  if (!row.known[n.feature]) return n.feature;
  return naive_stop_feature(t, row.values[n.feature] <= n.threshold ? n.left : n.right, row);
}

inline std::map<std::string, int> naive_vote(const forest::CohortForest& f,
                                             const forest::EncodedRow& row) {
  std::map<std::string, int> out;
  for (const auto& t : f.trees) {
    const int feat = naive_stop_feature(t, 0, row);
    if (feat >= 0) out[f.schema.feature_name(feat)] += 1;
  }
  return out;
}

inline int grow_random_tree(forest::DecisionTree& t, std::mt19937_64& rng, int depth,
                            int max_depth, int n_features, int n_targets) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (depth == max_depth || u(rng) < 0.25) {
    for (int k = 0; k < n_targets; ++k) t.nodes[id].value.push_back(u(rng));
    return id;
  }
  const int f = std::uniform_int_distribution<int>(0, n_features - 1)(rng);
  const double thr = std::vector<double>{-0.5, 0.5, 3.5, 40.0}[rng() % 4];
  const int l = grow_random_tree(t, rng, depth + 1, max_depth, n_features, n_targets);
  const int r = grow_random_tree(t, rng, depth + 1, max_depth, n_features, n_targets);
  t.nodes[id].feature = f;
  t.nodes[id].threshold = thr;
  t.nodes[id].left = l;
  t.nodes[id].right = r;
  return id;
}

// Up to `max_trees` trees of depth <= `max_depth` over a schema of yes/no
// concepts c0.., one ordinal concept, age and two history items.
inline forest::CohortForest random_hand_forest(std::mt19937_64& rng, int n_concepts,
                                               int max_trees, int max_depth) {
  std::vector<std::string> concepts;
  std::vector<char> ordinal;
  for (int i = 0; i < n_concepts; ++i) {
    concepts.push_back("c" + std::to_string(i));
    ordinal.push_back(0);
  }
  concepts.push_back("c_duration");
  ordinal.push_back(1);
  forest::CohortForest f;
  f.schema = forest::FeatureSchema(concepts, ordinal, {"diagnoses:x", "procedures:y"});
  f.targets = {"d0", "d1"};
  const int n_trees = std::uniform_int_distribution<int>(1, max_trees)(rng);
  for (int i = 0; i < n_trees; ++i) {
    forest::DecisionTree t;
    grow_random_tree(t, rng, 0, max_depth, static_cast<int>(f.schema.size()), 2);
    f.trees.push_back(std::move(t));
  }
  return f;
}

inline std::vector<cms::Assertion> random_assertions(const forest::CohortForest& f,
                                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<cms::Assertion> out;
  for (std::size_t i = 0; i < f.schema.n_concepts(); ++i) {
    if (u(rng) < 0.5) continue;
    const std::string& id = f.schema.concepts()[i];
    if (f.schema.ordinal()[i]) {
      out.push_back({id, cms::DurationDays{static_cast<int>(rng() % 30)}});
    } else {
      const cms::Certainty c[] = {cms::Certainty::kCertain, cms::Certainty::kAbsent,
                                  cms::Certainty::kUnsure};
      out.push_back({id, c[rng() % 3]});
    }
  }
  return out;
}

// ---- loss-weight selection -----------------------------------------------

// For each tuple and head, counts tuples that score strictly lower; picks the
// tuple whose worst rank is highest, the earliest on ties.
inline std::size_t max_min_rank(const std::vector<std::array<double, 4>>& table) {
  std::size_t best = 0;
  int best_min = -1;
  for (std::size_t a = 0; a < table.size(); ++a) {
    int worst = 1 << 30;
    for (int h = 0; h < 4; ++h) {
      int rank = 1;
      for (std::size_t b = 0; b < table.size(); ++b) rank += table[b][h] < table[a][h];
      worst = std::min(worst, rank);
    }
    if (worst > best_min) {
      best_min = worst;
      best = a;
    }
  }
  return best;
}

}  // namespace triage::oracle

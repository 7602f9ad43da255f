#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "triage/error.hpp"
#include "triage/forest/features.hpp"

namespace triage::forest {
namespace {

struct ToyData {
  std::vector<std::vector<double>> X;
  std::vector<std::vector<int>> Y;
};

// Feature 0 decides the label (with 2% flips); features 1..4 are noise.
ToyData separable(std::uint64_t seed, int n = 500) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ToyData d;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(5);
    for (double& v : x) v = u(rng);
    bool y = x[0] > 0.4;
    if (u(rng) < 0.02) y = !y;
    d.X.push_back(x);
    d.Y.push_back(y ? std::vector<int>{0} : std::vector<int>{});
  }
  return d;
}

double best_stump_accuracy(const ToyData& d) {
  double best = 0.0;
  for (std::size_t f = 0; f < d.X[0].size(); ++f) {
    for (const auto& row : d.X) {
      int agree = 0;
      for (std::size_t i = 0; i < d.X.size(); ++i) {
        agree += (d.X[i][f] > row[f]) == !d.Y[i].empty();
      }
      const double acc = static_cast<double>(agree) / d.X.size();
      best = std::max({best, acc, 1.0 - acc});
    }
  }
  return best;
}

CohortForest wrap(std::vector<DecisionTree> trees, std::size_t n_features) {
  CohortForest f;
  std::vector<std::string> concepts;
  for (std::size_t i = 0; i + 1 < n_features; ++i) concepts.push_back("f" + std::to_string(i));
  f.schema = FeatureSchema(concepts, std::vector<char>(concepts.size(), 0), {});
  f.targets = {"y"};
  f.trees = std::move(trees);
  return f;
}

DecisionTree leaf_tree(double p) {
  DecisionTree t;
  t.nodes.push_back(TreeNode{});
  t.nodes[0].value = {p};
  return t;
}

TEST(TrainForest, SeparableDataMatchesStumpOracle) {
  const ToyData d = separable(1);
  const double stump = best_stump_accuracy(d);
  ASSERT_GE(stump, 0.95);
  ForestParams p;
  p.n_trees = 25;
  p.feature_fraction = 0.4;
  p.seed = 3;
  const CohortForest f = wrap(train_trees(d.X, d.Y, 1, p), 5);
  int correct = 0;
  for (std::size_t i = 0; i < d.X.size(); ++i) {
    correct += (f.predict_proba(d.X[i])[0] > 0.5) == !d.Y[i].empty();
  }
  EXPECT_GE(static_cast<double>(correct) / d.X.size(), 0.95);
}

TEST(TrainForest, DepthOneTreesHaveAtMostThreeNodes) {
  const ToyData d = separable(2);
  ForestParams p;
  p.n_trees = 10;
  p.max_depth = 1;
  p.feature_fraction = 1.0;
  for (const DecisionTree& t : train_trees(d.X, d.Y, 1, p)) {
    EXPECT_LE(t.nodes.size(), 3u);
    EXPECT_LE(t.depth(), 1);
  }
}

TEST(TrainForest, DeterministicForFixedSeed) {
  const ToyData d = separable(3);
  ForestParams p;
  p.n_trees = 8;
  p.seed = 42;
  const CohortForest a = wrap(train_trees(d.X, d.Y, 1, p), 5);
  const CohortForest b = wrap(train_trees(d.X, d.Y, 1, p), 5);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  p.threads = 4;
  const CohortForest c = wrap(train_trees(d.X, d.Y, 1, p), 5);
  EXPECT_EQ(a.to_json().dump(), c.to_json().dump());
}

TEST(TrainForest, RejectsDegenerateInput) {
  ForestParams p;
  EXPECT_THROW(train_trees({{0.0}}, {{0}}, 1, p), ValidationError);
  EXPECT_THROW(train_trees({{0.0}, {1.0}}, {{}, {}}, 1, p), ValidationError);
}

TEST(PredictProba, AveragesLeaves) {
  CohortForest same = wrap({leaf_tree(0.3), leaf_tree(0.3), leaf_tree(0.3)}, 2);
  EXPECT_DOUBLE_EQ(same.predict_proba(std::vector<double>{0.0, 0.0})[0], 0.3);
  CohortForest two = wrap({leaf_tree(0.2), leaf_tree(0.6)}, 2);
  EXPECT_DOUBLE_EQ(two.predict_proba(std::vector<double>{0.0, 0.0})[0], 0.4);
  EXPECT_THROW(two.predict_proba(std::vector<double>{0.0}), ShapeError);
}

const TreeNode& walk(const DecisionTree& t, int node, const std::vector<double>& x) {
  const TreeNode& n = t.nodes[node];
  if (n.feature < 0) return n;
  return walk(t, x[n.feature] <= n.threshold ? n.left : n.right, x);
}

TEST(PredictProba, MatchesRecursiveTraversal) {
  const ToyData d = separable(4, 300);
  ForestParams p;
  p.n_trees = 15;
  p.seed = 5;
  const CohortForest f = wrap(train_trees(d.X, d.Y, 1, p), 5);
  for (const auto& x : d.X) {
    double sum = 0.0;
    for (const DecisionTree& t : f.trees) sum += walk(t, 0, x).value[0];
    EXPECT_NEAR(f.predict_proba(x)[0], sum / f.trees.size(), 1e-12);
  }
}

TEST(CohortForest, CborRoundTripPredictsIdentically) {
  const ToyData d = separable(5, 200);
  ForestParams p;
  p.n_trees = 5;
  CohortForest f = wrap(train_trees(d.X, d.Y, 1, p), 5);
  f.cohort = CohortKey{"cough", 4, Sex::kMale};
  const auto path = std::filesystem::temp_directory_path() / "triage_forest_rt.cbor";
  f.save(path);
  const CohortForest g = CohortForest::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(g.cohort, f.cohort);
  for (const auto& x : d.X) EXPECT_EQ(g.predict_proba(x), f.predict_proba(x));
}

TEST(Encoding, LayoutAndValues) {
  const FeatureSchema s({"cough", "cough_duration"}, {0, 1}, {"diagnoses:J45"});
  History h;
  h.channels[0].push_back({30, {"J45"}});
  const std::vector<cms::Assertion> a{{"cough", cms::Certainty::kAbsent}};
  EncodedRow r = encode_row(s, 47, a, h);
  EXPECT_EQ(r.values, (std::vector<double>{-1.0, -1.0, 47.0, 1.0}));
  EXPECT_EQ(r.known, (std::vector<char>{1, 0, 1, 1}));
  const std::vector<cms::Assertion> b{{"cough_duration", cms::DurationDays{14}},
                                      {"cough", cms::Certainty::kUnsure}};
  r = encode_row(s, 47, b, {});
  EXPECT_EQ(r.values, (std::vector<double>{0.0, 14.0, 47.0, 0.0}));
  EXPECT_EQ(r.known, (std::vector<char>{1, 1, 1, 1}));
  EXPECT_EQ(s.feature_name(3), "hx:diagnoses:J45");
}

// 200 rows in cohort "a", 800 in "b". d1..d5 occur in every "a" row (lift
// 5); dx_low occurs in 150 "a" and 350 "b" rows (lift 1.5).
struct PrepFixture {
  cms::ConceptCatalog catalog;
  std::vector<Encounter> data;
};

PrepFixture prep_fixture(int n_concepts) {
  std::vector<cms::Concept> concepts;
  for (int i = 0; i < n_concepts; ++i) {
    cms::Concept c;
    c.id = "c" + std::to_string(10000 + i);
    concepts.push_back(c);
  }
  PrepFixture fx{cms::ConceptCatalog::from_concepts("t", concepts), {}};
  for (int i = 0; i < 1000; ++i) {
    Encounter e;
    e.patient_id = "p" + std::to_string(i);
    e.age_years = 35;
    e.age_bin = age_bin_of(35);
    e.sex = Sex::kFemale;
    const bool in_a = i < 200;
    e.chief_complaints = {in_a ? "a" : "b"};
    if (in_a) {
      for (int k = i; k < n_concepts; k += 200) {
        e.assertions.push_back({concepts[k].id, cms::Certainty::kCertain});
      }
      // c10000 is asserted in every row, so it is the most common concept.
      if (i != 0) e.assertions.push_back({concepts[0].id, cms::Certainty::kAbsent});
      for (int d = 1; d <= 5; ++d) {
        e.outcomes.codes[0].push_back("d" + std::to_string(d));
      }
    }
    if ((in_a && i < 150) || (!in_a && i < 550)) e.outcomes.codes[0].push_back("dx_low");
    fx.data.push_back(std::move(e));
  }
  return fx;
}

TEST(PrepareCohort, KeepsTopThousandConceptsAndQualifyingTargets) {
  const PrepFixture fx = prep_fixture(1200);
  const auto lift = stats::bayesian_lift(fx.data, OutcomeKind::kDiagnosis);
  EXPECT_DOUBLE_EQ(lift.find("dx_low", "a")->lift, 1.5);
  const CohortKey key{"a", age_bin_of(35), Sex::kFemale};
  const auto data = prepare_cohort_data(fx.data, key, lift, fx.catalog);
  ASSERT_TRUE(data.has_value());
  EXPECT_EQ(data->schema.n_concepts(), 1000u);
  EXPECT_EQ(data->schema.concepts().front(), "c10000");
  EXPECT_EQ(data->targets, (std::vector<std::string>{"d1", "d2", "d3", "d4", "d5"}));
  EXPECT_EQ(data->X.size(), 200u);
  for (const auto& y : data->Y) EXPECT_EQ(y.size(), 5u);
}

TEST(PrepareCohort, SmallCohortGetsNoModel) {
  const PrepFixture fx = prep_fixture(10);
  const auto lift = stats::bayesian_lift(fx.data, OutcomeKind::kDiagnosis);
  PrepareOptions o;
  o.min_count = 201;
  EXPECT_FALSE(prepare_cohort_data(fx.data, {"a", age_bin_of(35), Sex::kFemale}, lift,
                                   fx.catalog, o));
  EXPECT_FALSE(prepare_cohort_data(fx.data, {"a", 0, Sex::kMale}, lift, fx.catalog));
}

}  // namespace
}  // namespace triage::forest

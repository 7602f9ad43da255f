#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "triage/error.hpp"
#include "triage/neural/assessment.hpp"
#include "triage/neural/grad_check.hpp"
#include "triage/neural/loss_weight_search.hpp"
#include "triage/util/json_io.hpp"

namespace triage::neural {
namespace {

class StandardGradCheck : public ::testing::TestWithParam<int> {};

TEST_P(StandardGradCheck, BelowTolerance) {
  auto targets = standard_grad_check_targets(11);
  const auto& t = targets.at(GetParam());
  EXPECT_LT(gradient_check(t, 1e-5), 1e-4) << t.name;
}

INSTANTIATE_TEST_SUITE_P(Components, StandardGradCheck,
                         ::testing::Range(0, static_cast<int>(
                                                 standard_grad_check_targets(11).size())));

TEST(GradCheck, ConstantFunctionHasZeroError) {
  GradCheckTarget t;
  t.name = "constant";
  t.loss = [] { return 3.0; };
  t.compute_gradients = [] {};
  EXPECT_EQ(gradient_check(t), 0.0);
}

TEST(GradCheck, CatchesAWrongGradient) {
  auto p = std::make_shared<Param>();
  p->name = "w";
  p->resize(1, 1);
  p->value(0, 0) = 0.7;
  GradCheckTarget t{"wrong", {p.get()}, [p] { return p->value(0, 0) * p->value(0, 0); },
                    [p] { p->grad(0, 0) = p->value(0, 0); }, p};
  EXPECT_GT(gradient_check(t), 0.4);
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(LstmCell, SingleStepMatchesHandArithmetic) {
  LstmCell cell("c", 1, 1);
  cell.Wx.value << 0.3, -0.2, 0.5, 0.1;
  cell.Wh.value << 0.4, 0.2, -0.3, 0.6;
  cell.b.value << 0.05, 1.0, -0.1, 0.2;
  const double x = 0.8;
  const double i = sigm(0.3 * x + 0.05), f = sigm(-0.2 * x + 1.0);
  const double g = std::tanh(0.5 * x - 0.1), o = sigm(0.1 * x + 0.2);
  const double c = i * g + f * 0.0;
  Mat in(1, 1);
  in << x;
  EXPECT_NEAR(cell.forward_const({in})(0, 0), o * std::tanh(c), 1e-12);
}

// One item in one channel, hand-set scalars: seven zero-input steps of
// left padding, then the item's embedding.
TEST(HistoryEncoder, SingleEntryMatchesScalarRollout) {
  HistoryVocab vocab;
  vocab.items[0] = {"J45"};
  vocab.reindex();
  HistoryEncoder enc({1, 0, 0, 0}, 1, 1);
  const double wx[4] = {0.3, -0.2, 0.5, 0.1}, wh[4] = {0.4, 0.2, -0.3, 0.6},
               b[4] = {0.05, 1.0, -0.1, 0.2};
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    enc.tables[ch].value.setConstant(0.9);
    for (int k = 0; k < 4; ++k) {
      enc.cells[ch].Wx.value(0, k) = wx[k];
      enc.cells[ch].Wh.value(0, k) = wh[k];
      enc.cells[ch].b.value(0, k) = b[k];
    }
  }
  History h;
  h.channels[0].push_back({10, {"J45"}});
  const HistorySeq seq = encode_history_items(vocab, h);
  const Mat out = enc.forward_const({&seq});

  auto rollout = [&](double last_x) {
    double hs = 0.0, cs = 0.0;
    for (int t = 0; t < kHistorySteps; ++t) {
      const double x = t == kHistorySteps - 1 ? last_x : 0.0;
      const double i = sigm(wx[0] * x + wh[0] * hs + b[0]);
      const double f = sigm(wx[1] * x + wh[1] * hs + b[1]);
      const double g = std::tanh(wx[2] * x + wh[2] * hs + b[2]);
      const double o = sigm(wx[3] * x + wh[3] * hs + b[3]);
      cs = f * cs + i * g;
      hs = o * std::tanh(cs);
    }
    return hs;
  };
  EXPECT_NEAR(out(0, 0), rollout(0.9), 1e-10);
  for (int ch = 1; ch < kNumHistoryChannels; ++ch) EXPECT_NEAR(out(0, ch), rollout(0.0), 1e-10);
}

TEST(HistoryEncoder, EmptyHistoryIsZeroInputRollout) {
  HistoryEncoder enc({3, 3, 3, 3}, 4, 5);
  Rng rng(3);
  enc.init(rng);
  const HistorySeq empty;
  const Mat out = enc.forward_const({&empty});
  const std::vector<Mat> zeros(kHistorySteps, Mat::Zero(1, 4));
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    const Mat expect = enc.cells[ch].forward_const(zeros);
    for (int j = 0; j < 5; ++j) EXPECT_EQ(out(0, ch * 5 + j), expect(0, j));
  }
}

TEST(HistoryEncoder, ThreeEntriesAreLeftPadded) {
  HistoryVocab vocab;
  vocab.items[1] = {"a", "b", "c"};
  vocab.reindex();
  HistoryEncoder enc({0, 3, 0, 0}, 4, 5);
  Rng rng(4);
  enc.init(rng);
  History h;
  h.channels[1] = {{90, {"a"}}, {40, {"b", "c"}}, {5, {"unknown", "a"}}};
  const HistorySeq seq = encode_history_items(vocab, h);
  for (int t = 0; t < 5; ++t) EXPECT_TRUE(seq.steps[1][t].empty());
  EXPECT_EQ(seq.steps[1][5], std::vector<int>{0});
  EXPECT_EQ(seq.steps[1][6], (std::vector<int>{1, 2}));
  EXPECT_EQ(seq.steps[1][7], std::vector<int>{0});  // out-of-vocabulary dropped
  // Explicit zero padding to length eight gives the same state.
  std::vector<Mat> xs(kHistorySteps, Mat::Zero(1, 4));
  xs[5] = enc.tables[1].value.row(0);
  xs[6] = enc.tables[1].value.row(1) + enc.tables[1].value.row(2);
  xs[7] = enc.tables[1].value.row(0);
  const Mat expect = enc.cells[1].forward_const(xs);
  const Mat out = enc.forward_const({&seq});
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(out(0, 5 + j), expect(0, j), 1e-15);
}

TEST(HistoryEncoder, MoreThanEightEntriesIsShapeError) {
  History h;
  for (int i = 0; i < 9; ++i) h.channels[2].push_back({300 - i, {"x"}});
  EXPECT_THROW(encode_history_items(HistoryVocab{}, h), ShapeError);
}

TEST(LossWeights, DefaultsAndValidation) {
  EXPECT_EQ(AssessmentConfig{}.loss_weights, (LossWeights{3.0, 1.0, 0.9, 0.9}));
  EXPECT_NO_THROW(validate_loss_weights(kDefaultLossWeights));
  EXPECT_THROW(validate_loss_weights({0, 0, 0, 0}), ConfigError);
  EXPECT_THROW(validate_loss_weights({1, -1, 1, 1}), ConfigError);
  EXPECT_THROW(validate_loss_weights({1, NAN, 1, 1}), ConfigError);
}

// Two chief complaints. Under "cough", finding x means D1/M1/L1/I1 and
// finding y means D2/M2/L2/I2; "rash" visits carry their own codes.
struct ToyAssessment {
  cms::ConceptCatalog catalog;
  std::vector<Encounter> train;
  std::vector<Encounter> test;
};

std::vector<Encounter> toy_encounters(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::vector<Encounter> out;
  for (int i = 0; i < n; ++i) {
    Encounter e;
    e.patient_id = "p" + std::to_string(seed) + "_" + std::to_string(i);
    e.age_years = 20 + static_cast<int>(rng() % 50);
    e.age_bin = age_bin_of(e.age_years);
    e.sex = rng() % 2 ? Sex::kMale : Sex::kFemale;
    const char* prefix[] = {"D", "M", "L", "I"};
    if (rng() % 10 < 4) {
      e.chief_complaints = {"cough"};
      const bool x = rng() % 2 == 0;
      e.assertions.push_back({"x", x ? cms::Certainty::kCertain : cms::Certainty::kAbsent});
      e.assertions.push_back({"y", x ? cms::Certainty::kAbsent : cms::Certainty::kCertain});
      for (int h = 0; h < 4; ++h) {
        e.outcomes.codes[h].push_back(std::string(prefix[h]) + (x ? "1" : "2"));
      }
    } else {
      e.chief_complaints = {"rash"};
      e.assertions.push_back({"z", cms::Certainty::kCertain});
      for (int h = 0; h < 4; ++h) e.outcomes.codes[h].push_back(std::string(prefix[h]) + "R");
    }
    out.push_back(std::move(e));
  }
  return out;
}

ToyAssessment toy_assessment() {
  std::vector<cms::Concept> concepts;
  for (const char* id : {"x", "y", "z"}) {
    cms::Concept c;
    c.id = id;
    concepts.push_back(c);
  }
  return {cms::ConceptCatalog::from_concepts("t", concepts), toy_encounters(1, 1500),
          toy_encounters(2, 500)};
}

AssessmentConfig toy_config() {
  AssessmentConfig c;
  c.width = 16;
  c.depth = 3;
  c.target_min_count = 20;
  c.history_min_count = 1;
  c.epochs = 6;
  c.learning_rate = 5e-3;
  c.seed = 9;
  return c;
}

TEST(Assessment, SchemaKeepsOnlyLiftFilteredTargets) {
  const ToyAssessment t = toy_assessment();
  const AssessmentSchema s = build_assessment_schema(t.train, t.catalog, toy_config());
  EXPECT_EQ(s.targets[0], (std::vector<std::string>{"D1", "D2"}));
  EXPECT_EQ(s.retained[0].at("D1"), std::set<std::string>{"cough"});
  EXPECT_EQ(s.targets[3], (std::vector<std::string>{"I1", "I2"}));
}

TEST(Assessment, DeterministicToyWorldIsLearned) {
  const ToyAssessment t = toy_assessment();
  const AssessmentConfig c = toy_config();
  const AssessmentSchema s = build_assessment_schema(t.train, t.catalog, c);
  const auto train = make_examples(s, t.train, c);
  const auto test = make_examples(s, t.test, c);
  const AssessmentModel m = train_assessment(s, train, c);
  const auto pr = head_pr_auc(m, test);
  EXPECT_GE(pr[0], 0.95);
  int first = 0;
  int n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (t.test[i].chief_complaints[0] != "cough") continue;
    ++n;
    const Assessment a = predict_assessment(m, test[i]);
    first += a[0].front().code == t.test[i].outcomes.codes[0].front();
  }
  EXPECT_GE(static_cast<double>(first) / n, 0.9);
}

TEST(Assessment, UntrainedModelPredictsBaseRates) {
  const ToyAssessment t = toy_assessment();
  AssessmentConfig c = toy_config();
  c.epochs = 0;
  const AssessmentSchema s = build_assessment_schema(t.train, t.catalog, c);
  const auto train = make_examples(s, t.train, c);
  const AssessmentModel m = train_assessment(s, train, c);
  double d1 = 0.0;
  for (const auto& x : train) {
    d1 += std::find(x.labels[0].begin(), x.labels[0].end(), 0) != x.labels[0].end();
  }
  d1 /= train.size();
  const HeadScores a = m.predict(train[0]);
  const HeadScores b = m.predict(train[0]);
  EXPECT_NEAR(a[0][0], d1, 1e-9);
  EXPECT_EQ(a, b);
}

TEST(Assessment, SaveLoadPredictsIdentically) {
  const ToyAssessment t = toy_assessment();
  AssessmentConfig c = toy_config();
  c.epochs = 1;
  const AssessmentSchema s = build_assessment_schema(t.train, t.catalog, c);
  const auto train = make_examples(s, t.train, c);
  const AssessmentModel m = train_assessment(s, train, c);
  const auto path = std::filesystem::temp_directory_path() / "triage_assess_rt.cbor";
  util::write_cbor_file(path, m.to_json());
  const AssessmentModel back = AssessmentModel::from_json(util::read_cbor_file(path));
  std::filesystem::remove(path);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(back.predict(train[i]), m.predict(train[i]));
}

TEST(Assessment, NoHistoryConfigIgnoresHistory) {
  const ToyAssessment t = toy_assessment();
  AssessmentConfig c = toy_config();
  c.use_history = false;
  Encounter e = t.train[0];
  e.history.channels[0].push_back({20, {"J45"}});
  const AssessmentSchema s = build_assessment_schema(t.train, t.catalog, c);
  const AssessmentExample x = make_example(s, e, c);
  for (const auto& ch : x.history.steps) {
    for (const auto& step : ch) EXPECT_TRUE(step.empty());
  }
}

TEST(WeightSearch, RankRuleMatchesExhaustiveOracle) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> level(0, 6);
  for (int trial = 0; trial < 20; ++trial) {
    HeadTable table(10);
    std::vector<std::array<double, 4>> plain(10);
    for (int i = 0; i < 10; ++i) {
      for (int h = 0; h < 4; ++h) {
        table[i][h] = plain[i][h] = 0.5 + level(rng) / 20.0;  // with ties
      }
    }
    EXPECT_EQ(select_max_min_rank(table), oracle::max_min_rank(plain)) << trial;
  }
}

TEST(WeightSearch, UniformlyTopTupleIsSelected) {
  // A ranks 3 on every head; B and C each rank below 3 somewhere.
  const HeadTable table{{0.80, 0.20, 0.90, 0.5},
                        {0.85, 0.70, 0.60, 0.6},
                        {0.70, 0.60, 0.95, 0.4}};
  const HeadTable with_a{{0.80, 0.20, 0.90, 0.5},
                         {0.90, 0.90, 0.99, 0.9},
                         {0.70, 0.60, 0.95, 0.4}};
  EXPECT_EQ(rank_trials(with_a)[1], (std::array<int, 4>{3, 3, 3, 3}));
  EXPECT_EQ(select_max_min_rank(with_a), 1u);
  EXPECT_EQ(select_max_min_rank(table), oracle::max_min_rank(
                                            {{0.80, 0.20, 0.90, 0.5},
                                             {0.85, 0.70, 0.60, 0.6},
                                             {0.70, 0.60, 0.95, 0.4}}));
}

TEST(WeightSearch, SampledTuplesAreDistinctCandidates) {
  const auto tuples = sample_weight_tuples(default_weight_candidates(), 10, 3);
  ASSERT_EQ(tuples.size(), 10u);
  std::set<LossWeights> seen(tuples.begin(), tuples.end());
  EXPECT_EQ(seen.size(), 10u);
  for (const auto& t : tuples) {
    for (double w : t) {
      EXPECT_NE(std::find(default_weight_candidates().begin(),
                          default_weight_candidates().end(), w),
                default_weight_candidates().end());
    }
  }
  EXPECT_EQ(sample_weight_tuples(default_weight_candidates(), 10, 3), tuples);
}

TEST(WeightSearch, TenTrialsOnFivePercentAndDeterministic) {
  const ToyAssessment t = toy_assessment();
  AssessmentConfig c = toy_config();
  c.epochs = 2;
  const AssessmentSchema s = build_assessment_schema(t.train, t.catalog, c);
  const auto train = make_examples(s, t.train, c);
  const auto eval = make_examples(s, t.test, c);
  const SearchReport a =
      loss_weight_search(s, train, eval, c, default_weight_candidates(), 10, 0.05, 5);
  ASSERT_EQ(a.tuples.size(), 10u);
  ASSERT_EQ(a.pr_auc.size(), 10u);
  EXPECT_EQ(a.n_train, 75u);
  const SearchReport b =
      loss_weight_search(s, train, eval, c, default_weight_candidates(), 10, 0.05, 5);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

}  // namespace
}  // namespace triage::neural

#include "triage/service/experiments.hpp"

#include <algorithm>

#include "triage/error.hpp"
#include "triage/stats/lift.hpp"
#include "triage/stats/metrics.hpp"
#include "triage/stats/tests.hpp"

namespace triage::service {

std::map<CohortKey, forest::CohortForest> train_cohort_forests(const WorldFixture& fx,
                                                               const FixtureConfig& config,
                                                               std::uint64_t seed) {
  std::map<CohortKey, std::size_t> sizes;
  for (const auto& e : fx.train) ++sizes[e.cohort()];
  std::vector<std::pair<CohortKey, std::size_t>> ranked(sizes.begin(), sizes.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto lift = stats::bayesian_lift(fx.train, OutcomeKind::kDiagnosis);
  std::map<CohortKey, forest::CohortForest> out;
  for (const auto& [key, n] : ranked) {
    if (static_cast<int>(out.size()) >= config.max_cohorts) break;
    auto data = forest::prepare_cohort_data(fx.train, key, lift, fx.world.catalog, config.prepare);
    if (!data) continue;
    forest::ForestParams params = config.forest;
    params.seed = seed * 1000003ULL + out.size();
    try {
      out.emplace(key, forest::train_forest(*data, params, config.prepare.history_days));
    } catch (const ValidationError&) {
      continue;  // no target with both classes in this cohort
    }
  }
  return out;
}

double forest_micro_roc_auc(const std::map<CohortKey, forest::CohortForest>& forests,
                            std::span<const Encounter> test) {
  std::vector<double> scores;
  std::vector<char> truth;
  for (const auto& e : test) {
    auto it = forests.find(e.cohort());
    if (it == forests.end()) continue;
    const auto& f = it->second;
    const auto row = f.encode(e.age_years, e.assertions, e.history);
    const auto p = f.predict_proba(row.values);
    const auto& dx = e.outcomes.of(OutcomeKind::kDiagnosis);
    for (std::size_t t = 0; t < f.targets.size(); ++t) {
      scores.push_back(p[t]);
      truth.push_back(std::find(dx.begin(), dx.end(), f.targets[t]) != dx.end() ? 1 : 0);
    }
  }
  return stats::roc_auc(scores, truth);
}

util::Json DirectionResult::to_json() const {
  return {{"with_history", with_history},
          {"without_history", without_history},
          {"wins", wins},
          {"losses", losses},
          {"p_value", p_value}};
}

namespace {

void add_pair(DirectionResult& r, double with, double without) {
  r.with_history.push_back(with);
  r.without_history.push_back(without);
  if (with > without) ++r.wins;
  if (with < without) ++r.losses;
  r.p_value = stats::sign_test_p(r.wins, r.losses);
}

std::vector<std::string> cc_ids(const datagen::WorldModel& w) {
  std::vector<std::string> out;
  for (const auto& c : w.chief_complaints) out.push_back(c.id);
  return out;
}

}  // namespace

AblationConfig history_ablation_config() {
  AblationConfig c;
  c.fixture.world.chronic_fraction = 0.8;
  c.fixture.world.history_strength = 0.9;
  c.fixture.world.followup_rate = 0.3;
  // Weak finding emissions leave room for history to add signal.
  c.fixture.world.emission_high_min = 0.2;
  c.fixture.world.emission_high_max = 0.5;
  c.fixture.world.characteristic_concepts = 3;
  c.fixture.max_cohorts = 4;
  c.assessment.target_min_count = 30;
  c.assessment.history_min_count = 3;
  c.assessment.epochs = 8;
  c.cc.history_min_count = 3;
  c.cc.epochs = 6;
  return c;
}

util::Json AblationReport::to_json() const {
  return {{"qs_micro_roc_auc", qs.to_json()},
          {"assessment_diagnoses_pr_auc", assessment.to_json()},
          {"cc_micro_pr_auc", cc.to_json()}};
}

AblationReport history_ablation(const AblationConfig& config) {
  AblationReport report;
  for (int s = 0; s < config.n_seeds; ++s) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
    FixtureConfig fc = config.fixture;
    fc.max_cohorts = 0;  // forests are trained per arm below
    const WorldFixture fx = build_fixture(seed, fc);

    if (config.run_qs) {
      FixtureConfig with = config.fixture, without = config.fixture;
      with.prepare.use_history = true;
      without.prepare.use_history = false;
      add_pair(report.qs, forest_micro_roc_auc(train_cohort_forests(fx, with, seed), fx.test),
               forest_micro_roc_auc(train_cohort_forests(fx, without, seed), fx.test));
    }
    if (config.run_assessment) {
      std::array<double, 2> score{};
      for (int arm = 0; arm < 2; ++arm) {
        neural::AssessmentConfig ac = config.assessment;
        ac.use_history = arm == 0;
        ac.seed = seed;
        const auto schema = neural::build_assessment_schema(fx.train, fx.world.catalog, ac);
        const auto train = neural::make_examples(schema, fx.train, ac);
        const auto test = neural::make_examples(schema, fx.test, ac);
        const auto model = neural::train_assessment(schema, train, ac);
        score[arm] = neural::head_pr_auc(model, test)[0];
      }
      add_pair(report.assessment, score[0], score[1]);
    }
    if (config.run_cc) {
      std::array<double, 2> score{};
      for (int arm = 0; arm < 2; ++arm) {
        cc::CcConfig cfg = config.cc;
        cfg.use_history = arm == 0;
        cfg.seed = seed;
        const auto model = cc::train_cc_model(fx.train, cc_ids(fx.world), cfg);
        score[arm] = cc::cc_micro_pr_auc(model, fx.test);
      }
      add_pair(report.cc, score[0], score[1]);
    }
  }
  return report;
}

bool DepthReport::deep_at_least_logistic_on_all_heads() const {
  for (int h = 0; h < neural::kNumHeads; ++h) {
    if (deep[h] < logistic[h]) return false;
  }
  return true;
}

util::Json DepthReport::to_json() const {
  return {{"deep_pr_auc", deep}, {"logistic_pr_auc", logistic},
          {"deep_at_least_logistic", deep_at_least_logistic_on_all_heads()}};
}

DepthReport depth_vs_logistic(std::uint64_t seed, const FixtureConfig& fixture,
                              const neural::AssessmentConfig& config) {
  FixtureConfig fc = fixture;
  fc.max_cohorts = 0;
  const WorldFixture fx = build_fixture(seed, fc);
  neural::AssessmentConfig ac = config;
  ac.seed = seed;
  const auto schema = neural::build_assessment_schema(fx.train, fx.world.catalog, ac);
  const auto train = neural::make_examples(schema, fx.train, ac);
  const auto test = neural::make_examples(schema, fx.test, ac);
  DepthReport r;
  r.deep = neural::head_pr_auc(neural::train_assessment(schema, train, ac), test);
  r.logistic = neural::head_pr_auc(neural::train_logistic_baseline(schema, train, ac), test);
  return r;
}

}  // namespace triage::service

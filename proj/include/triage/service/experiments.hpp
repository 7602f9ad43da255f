#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "triage/cc/cc_classifier.hpp"
#include "triage/neural/assessment.hpp"
#include "triage/service/simulate.hpp"

namespace triage::service {

// Forests for the largest cohorts of fx.train that yield training data.
std::map<CohortKey, forest::CohortForest> train_cohort_forests(const WorldFixture& fx,
                                                               const FixtureConfig& config,
                                                               std::uint64_t seed);

// Micro ROC-AUC of each forest's diagnosis scores over the test encounters of
// its cohort, pooled across cohorts.
double forest_micro_roc_auc(const std::map<CohortKey, forest::CohortForest>& forests,
                            std::span<const Encounter> test);

// Paired with/without-history scores across seeds.
struct DirectionResult {
  std::vector<double> with_history;
  std::vector<double> without_history;
  int wins = 0;    // seeds where with-history scores strictly higher
  int losses = 0;  // seeds where it scores strictly lower
  double p_value = 1.0;  // one-sided sign test; ties are dropped
  util::Json to_json() const;
};

struct AblationConfig {
  int n_seeds = 10;
  std::uint64_t seed = 100;
  FixtureConfig fixture = small_fixture_config();
  neural::AssessmentConfig assessment;
  cc::CcConfig cc;
  bool run_qs = true;
  bool run_assessment = true;
  bool run_cc = true;
};

// Worlds where chronic conditions recur across visits and follow-up visits
// carry uninformative text, so history carries signal.
AblationConfig history_ablation_config();

struct AblationReport {
  DirectionResult qs;          // forest micro ROC-AUC
  DirectionResult assessment;  // diagnoses-head PR-AUC
  DirectionResult cc;          // cc classifier micro PR-AUC
  util::Json to_json() const;
};

AblationReport history_ablation(const AblationConfig& config);

struct DepthReport {
  std::array<double, neural::kNumHeads> deep{};
  std::array<double, neural::kNumHeads> logistic{};
  bool deep_at_least_logistic_on_all_heads() const;
  util::Json to_json() const;
};

// Trains the assessment model and the logistic baseline on one world and
// compares per-head PR-AUC on its test split.
DepthReport depth_vs_logistic(std::uint64_t seed, const FixtureConfig& fixture,
                              const neural::AssessmentConfig& config);

}  // namespace triage::service

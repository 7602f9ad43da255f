#include <gtest/gtest.h>

#include <numeric>

#include "triage/datagen/world.hpp"
#include "triage/error.hpp"

namespace triage::datagen {
namespace {

using cms::Certainty;

WorldConfig small_world() {
  WorldConfig c;
  c.n_chief_complaints = 4;
  c.n_conditions = 8;
  c.n_concepts = 40;
  c.conditions_per_cc = 3;
  c.n_background_diagnoses = 5;
  c.n_medications = 10;
  c.n_labs = 10;
  c.n_imaging = 5;
  return c;
}

TEST(BuildWorld, DeterministicForFixedSeed) {
  WorldConfig c;
  c.n_chief_complaints = 20;
  c.n_conditions = 40;
  EXPECT_EQ(build_world(1, c).to_json().dump(), build_world(1, c).to_json().dump());
}

TEST(BuildWorld, SeedChangesEmissions) {
  const WorldModel a = build_world(1, small_world());
  const WorldModel b = build_world(2, small_world());
  EXPECT_NE(a.conditions[0].concept_emission, b.conditions[0].concept_emission);
}

TEST(BuildWorld, ConditionWithoutDiagnosisIsConfigError) {
  WorldConfig c = small_world();
  c.primary_diagnosis_min = 0.0;
  c.primary_diagnosis_max = 0.0;
  EXPECT_THROW(build_world(1, c), ConfigError);
  c = small_world();
  c.n_conditions = 0;
  EXPECT_THROW(build_world(1, c), ConfigError);
}

TEST(BuildWorld, JsonRoundTrip) {
  const WorldModel w = build_world(3, small_world());
  EXPECT_EQ(WorldModel::from_json(w.to_json()).to_json(), w.to_json());
}

TEST(BuildWorld, EveryConditionEmitsItsPrimaryDiagnosis) {
  const WorldModel w = build_world(4, small_world());
  for (std::size_t k = 0; k < w.conditions.size(); ++k) {
    const auto& row = w.outcome_row(static_cast<int>(k), OutcomeKind::kDiagnosis);
    EXPECT_GT(row[w.conditions[k].primary_diagnosis], 0.5);
  }
}

TEST(SampleDataset, ZeroEncountersIsEmpty) {
  EXPECT_TRUE(sample_dataset(build_world(1, small_world()), 0).empty());
}

TEST(SampleDataset, IndependentOfSharding) {
  const WorldModel w = build_world(5, small_world());
  const auto all = sample_dataset(w, 50, 365, 2);
  for (std::size_t i : {0u, 17u, 49u}) {
    EXPECT_EQ(encounter_to_json(sample_encounter(w, i, 365, 2)),
              encounter_to_json(all[i]));
  }
}

TEST(SampleDataset, LookbackBoundsHistory) {
  const WorldModel w = build_world(6, small_world());
  for (const Encounter& e : sample_dataset(w, 500, 180)) {
    for (const auto& ch : e.history.channels) {
      EXPECT_LE(ch.size(), static_cast<std::size_t>(kMaxHistoryEntries));
      for (const HistoryEntry& h : ch) EXPECT_LE(h.days_ago, 180);
      for (std::size_t i = 1; i < ch.size(); ++i) {
        EXPECT_GE(ch[i - 1].days_ago, ch[i].days_ago);  // oldest first
      }
    }
  }
}

TEST(SampleDataset, EncounterJsonRoundTrip) {
  const WorldModel w = build_world(7, small_world());
  for (const Encounter& e : sample_dataset(w, 20)) {
    const util::Json j = encounter_to_json(e);
    EXPECT_EQ(encounter_to_json(encounter_from_json(j)), j);
  }
}

// Oracle: the world's own prior table, marginalized over demographics with
// the sampler's independent cc, age-bin and sex draws.
TEST(SampleDataset, ConditionFrequenciesMatchPriors) {
  const WorldModel w = build_world(8, small_world());
  const int K = static_cast<int>(w.conditions.size());
  const double cc_total = std::accumulate(w.cc_weights.begin(), w.cc_weights.end(), 0.0);
  const double age_total =
      std::accumulate(w.age_bin_weights.begin(), w.age_bin_weights.end(), 0.0);
  std::vector<double> expected(K + 1, 0.0);
  for (std::size_t c = 0; c < w.chief_complaints.size(); ++c) {
    for (int b = 0; b < kNumAgeBins; ++b) {
      for (Sex s : {Sex::kFemale, Sex::kMale}) {
        const double p = w.cc_weights[c] / cc_total * w.age_bin_weights[b] / age_total *
                         (s == Sex::kFemale ? w.female_rate : 1.0 - w.female_rate);
        const CohortKey key{w.chief_complaints[c].id, b, s};
        for (int k = 0; k < K; ++k) expected[k] += p * w.prior(key)[k];
        expected[K] += p * w.healthy_prior(key);
      }
    }
  }
  const int n = 100000;
  std::vector<double> seen(K + 1, 0.0);
  for (const Encounter& e : sample_dataset(w, n)) {
    seen[e.latent.condition < 0 ? K : e.latent.condition] += 1.0 / n;
  }
  for (int k = 0; k <= K; ++k) EXPECT_NEAR(seen[k], expected[k], 0.01) << k;
}

TEST(Posterior, NoEvidenceGivesPriorWeightedEmissions) {
  const WorldModel w = build_world(9, small_world());
  const CohortKey key{w.chief_complaints[0].id, 5, Sex::kFemale};
  const Posterior post = true_posterior(w, key, {});
  const int K = static_cast<int>(w.conditions.size());
  for (std::size_t d = 0; d < post.diagnoses.size(); ++d) {
    double expect = w.healthy_prior(key) * w.outcome_row(K, OutcomeKind::kDiagnosis)[d];
    for (int k = 0; k < K; ++k) {
      expect += w.prior(key)[k] * w.outcome_row(k, OutcomeKind::kDiagnosis)[d];
    }
    EXPECT_NEAR(post.diagnoses[d], expect, 1e-12);
  }
}

// Brute-force Bayes over the three conditions plus healthy.
TEST(Posterior, MatchesHandBayesOnThreeConditionWorld) {
  WorldConfig c = small_world();
  c.n_chief_complaints = 1;
  c.n_conditions = 3;
  c.conditions_per_cc = 3;
  const WorldModel w = build_world(10, c);
  const CohortKey key{w.chief_complaints[0].id, 4, Sex::kMale};
  for (int base : {0, 1, 2}) {
    const std::string id = w.base_concepts[base].id;
    for (Certainty cert : {Certainty::kCertain, Certainty::kAbsent}) {
      const cms::Assertion a{id, cert};
      const Posterior post = true_posterior(w, key, std::span(&a, 1));
      std::vector<double> joint;
      for (int k = 0; k <= 3; ++k) {
        const double pk = k < 3 ? w.prior(key)[k] : w.healthy_prior(key);
        const double e = w.emission(k, base, key.sex);
        joint.push_back(pk * (cert == Certainty::kCertain ? e : 1.0 - e));
      }
      const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
      for (int k = 0; k <= 3; ++k) {
        EXPECT_NEAR(post.conditions[k], joint[k] / z, 1e-12);
      }
    }
  }
}

TEST(Posterior, CharacteristicFindingRaisesItsCondition) {
  const WorldModel w = build_world(11, small_world());
  const CohortKey key{w.chief_complaints[1].id, 6, Sex::kFemale};
  const int K = static_cast<int>(w.conditions.size());
  for (int k = 0; k < K; ++k) {
    if (w.prior(key)[k] <= 0.0) continue;
    // A finding emitted by k more than by any other condition.
    for (int base : w.conditions[k].characteristic) {
      bool unique = true;
      for (int j = 0; j <= K; ++j) {
        if (j != k && w.emission(j, base, key.sex) >= w.emission(k, base, key.sex)) {
          unique = false;
        }
      }
      if (!unique) continue;
      const cms::Assertion a{w.base_concepts[base].id, Certainty::kCertain};
      EXPECT_GE(true_posterior(w, key, std::span(&a, 1)).conditions[k], w.prior(key)[k]);
    }
  }
}

TEST(Posterior, ConflictingEvidenceIsDegenerate) {
  const WorldModel w = build_world(12, small_world());
  const CohortKey key{w.chief_complaints[0].id, 5, Sex::kFemale};
  const std::string id = w.base_concepts[0].id;
  const std::vector<cms::Assertion> both{{id, Certainty::kCertain}, {id, Certainty::kAbsent}};
  EXPECT_TRUE(true_posterior(w, key, both).degenerate);
}

}  // namespace
}  // namespace triage::datagen

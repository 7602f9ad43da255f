#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triage/cms/catalog.hpp"
#include "triage/datagen/encounter.hpp"

namespace triage::datagen {

// Size and shape knobs of a synthetic world. Defaults are desk scale.
struct WorldConfig {
  int n_chief_complaints = 20;
  int n_conditions = 40;
  int n_concepts = 200;  // yes/no findings; ordinal companions come on top
  double duration_fraction = 0.15;
  double severity_fraction = 0.05;
  int conditions_per_cc = 5;
  int characteristic_concepts = 6;
  double emission_high_min = 0.5;
  double emission_high_max = 0.9;
  double emission_background_max = 0.04;
  // NLP-style negated findings: probability that a non-present finding is
  // recorded "absent" (relevant to the chief complaint / otherwise).
  double absent_density = 0.3;
  double absent_density_background = 0.02;

  int secondary_diagnoses = 2;
  double primary_diagnosis_min = 0.6;  // must exceed 0.5
  double primary_diagnosis_max = 0.95;
  int n_background_diagnoses = 20;
  double outcome_background_max = 0.01;
  int n_medications = 40;
  int n_labs = 40;
  int n_imaging = 20;

  double healthy_min = 0.1;
  double healthy_max = 0.3;
  double off_cc_leak = 0.02;

  double second_cc_rate = 0.3;
  double followup_rate = 0.15;
  double text_confusion = 0.1;

  double chronic_fraction = 0.5;
  // Probability that a prior encounter of a chronic patient relates to the
  // current condition.
  double history_strength = 0.7;
  int max_prior_encounters = 10;
  int female_only_concepts = 4;

  util::Json to_json() const;
  static WorldConfig from_json(const util::Json& j);
};

struct ChiefComplaint {
  std::string id;
  std::string name;
  std::vector<std::string> keywords;
};

struct Condition {
  std::string id;
  bool chronic = false;
  int age_peak = 5;
  double age_width = 3.0;
  double female_share = 0.5;
  std::vector<int> characteristic;  // base concept indices
  // P[finding present | condition], per base concept.
  std::vector<double> concept_emission;
  // P[code | condition], dense per outcome vocabulary.
  std::array<std::vector<double>, kNumOutcomeKinds> outcome_emission;
  int primary_diagnosis = 0;
};

// A yes/no finding and its optional ordinal companions.
struct BaseConcept {
  std::string id;
  std::string duration_id;  // empty if none
  std::string severity_id;  // empty if none
  bool female_only = false;
};

// Immutable after build_world.
struct WorldModel {
  std::uint64_t seed = 0;
  WorldConfig config;
  std::vector<ChiefComplaint> chief_complaints;
  std::vector<Condition> conditions;
  std::vector<BaseConcept> base_concepts;
  cms::ConceptCatalog catalog;
  std::array<std::vector<std::string>, kNumOutcomeKinds> outcome_vocab;
  std::array<std::vector<std::string>, kNumHistoryChannels> history_vocab;
  // Emissions of healthy visits (index = conditions.size()).
  std::vector<double> healthy_concept_emission;
  std::array<std::vector<double>, kNumOutcomeKinds> healthy_outcome_emission;
  // priors[cc][age_bin][sex][condition]; residual mass is "healthy".
  std::vector<std::array<std::array<std::vector<double>, 2>, kNumAgeBins>>
      priors;
  // relevant[cc][base concept]: finding belongs to one of the cc's conditions.
  std::vector<std::vector<char>> relevant;
  std::vector<double> age_bin_weights;
  double female_rate = 0.59;
  std::vector<double> cc_weights;

  int cc_index(const std::string& cc) const;
  int base_index_of(const std::string& concept_id) const;
  const std::vector<double>& prior(const CohortKey& key) const;
  double healthy_prior(const CohortKey& key) const;
  // P[present | condition k, sex]; k == conditions.size() means healthy.
  double emission(int k, int base, Sex sex) const;
  const std::vector<double>& outcome_row(int k, OutcomeKind kind) const;

  // World-implied P[code | primary cc], marginal over demographics.
  double implied_outcome_rate(const std::string& cc, OutcomeKind kind,
                              int code) const;
  double implied_condition_rate(const CohortKey& key, int k) const {
    return prior(key)[k];
  }

  util::Json to_json() const;
  static WorldModel from_json(const util::Json& j);

  // Index for concept id -> base concept.
  std::unordered_map<std::string, int> concept_base;
  void rebuild_index();
};

// Deterministic for fixed (seed, config). Throws ConfigError on degenerate
// configurations.
WorldModel build_world(std::uint64_t seed, const WorldConfig& config = {});

// Question-sequencing knowledge base for the world, in kb.json form:
// scripted HPI per chief complaint, prerequisites for ordinal companions,
// inference rules from companions to their base finding, and sex fixers.
util::Json generate_kb(const WorldModel& world);

// Samples encounters. Encounter i depends only on (world.seed, stream, i), so
// the output is identical however it is sharded.
std::vector<Encounter> sample_dataset(const WorldModel& world,
                                      std::size_t n_encounters,
                                      int lookback_days = 365,
                                      std::uint64_t stream = 0);
Encounter sample_encounter(const WorldModel& world, std::uint64_t index,
                           int lookback_days = 365, std::uint64_t stream = 0);

// One synthetic reason-for-visit text for a chief complaint.
std::string sample_reason_text(const WorldModel& world, int cc,
                               std::uint64_t seed);

struct Posterior {
  // Size conditions.size() + 1; the last entry is "healthy".
  std::vector<double> conditions;
  // P[diagnosis code], indexed like outcome_vocab[kDiagnosis].
  std::vector<double> diagnoses;
  // Evidence had zero probability; the prior is returned instead.
  bool degenerate = false;
};

// Exact Bayes posterior given the asserted findings, assuming conditional
// independence of findings given the latent condition. "unsure" is ignored;
// ordinal assertions are evidence that their base finding is present.
Posterior true_posterior(const WorldModel& world, const CohortKey& cohort,
                         std::span<const cms::Assertion> asserted);

}  // namespace triage::datagen

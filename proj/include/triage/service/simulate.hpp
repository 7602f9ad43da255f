#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "triage/datagen/world.hpp"
#include "triage/forest/features.hpp"
#include "triage/forest/forest.hpp"
#include "triage/qseq/session.hpp"
#include "triage/service/session_manager.hpp"

namespace triage::service {

// The reply a patient with `truth`'s latent findings gives: yes for present
// findings and no otherwise, the true duration or severity (0 when the
// finding is absent), the present options of a select question, and a fixed
// string for free text.
qseq::Answer simulated_answer(const cms::ConceptCatalog& catalog, const std::string& question,
                              const Encounter& truth);

struct Transcript {
  std::string session_id;
  std::vector<std::string> questions;
  std::vector<std::string> provenance;
  util::Json assessment;  // the assessment response, null if unavailable
  int status = 200;       // last non-200 status, if any
};

// Runs a whole session for `patient` with its primary chief complaint as the
// confirmed cc, answering as simulated_answer does.
Transcript simulate_session(SessionManager& sessions, const cms::ConceptCatalog& catalog,
                            const Encounter& patient);
// The same over HTTP against host:port.
Transcript simulate_http_session(const std::string& host, int port,
                                 const cms::ConceptCatalog& catalog, const Encounter& patient);

// Models trained on one synthetic world, sized for desk-scale experiments.
struct WorldFixture {
  datagen::WorldModel world;
  qseq::KnowledgeBase kb;
  std::vector<Encounter> train;
  std::vector<Encounter> test;
  std::map<CohortKey, forest::CohortForest> forests;
};

struct FixtureConfig {
  datagen::WorldConfig world;
  std::size_t n_train = 6000;
  std::size_t n_test = 2000;
  int max_cohorts = 3;  // forests for the largest cohorts only
  forest::PrepareOptions prepare;
  forest::ForestParams forest;
};

// Small worlds: few chief complaints and conditions so cohorts are well
// populated at a few thousand encounters.
FixtureConfig small_fixture_config();
WorldFixture build_fixture(std::uint64_t seed, const FixtureConfig& config);

// Question-selection policy run on a simulated patient from the start of the
// ML phase (the scripted phase is skipped in both arms).
enum class Policy { kForest, kRandom };

// Asserted findings after `n_questions` questions under `policy`. The random
// policy draws uniformly among the cohort forest's questions that survive the
// same prerequisite and fixer rules.
qseq::SessionState run_policy(const WorldFixture& fx, const forest::CohortForest& forest,
                              const Encounter& patient, Policy policy, int n_questions,
                              std::mt19937_64& rng);

// -log P[true latent condition | asserted findings] under the world's exact
// posterior, floored at 1e-12.
double oracle_cross_entropy(const datagen::WorldModel& world, const CohortKey& cohort,
                            const qseq::SessionState& state, const Encounter& patient);

struct PolicyWorldResult {
  std::uint64_t seed = 0;
  int n_sessions = 0;
  double forest_ce = 0.0;
  double random_ce = 0.0;
};

struct PolicyReport {
  std::vector<PolicyWorldResult> worlds;
  int wins = 0;    // worlds where the forest policy has lower mean cross-entropy
  int losses = 0;
  double p_value = 1.0;  // one-sided sign test
  util::Json to_json() const;
};

struct PolicyConfig {
  int n_worlds = 20;
  std::uint64_t seed = 1;
  int n_questions = 10;
  int sessions_per_world = 60;
  FixtureConfig fixture = small_fixture_config();
};

PolicyReport compare_policies(const PolicyConfig& config);

}  // namespace triage::service

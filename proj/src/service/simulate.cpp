#include "triage/service/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "httplib.h"
#include "triage/error.hpp"
#include "triage/service/experiments.hpp"
#include "triage/stats/tests.hpp"

namespace triage::service {

namespace {

const cms::AssertionValue* finding(const Encounter& truth, const std::string& id) {
  for (const auto& a : truth.latent.findings) {
    if (a.concept_id == id) return &a.value;
  }
  return nullptr;
}

bool present(const Encounter& truth, const std::string& id) {
  const auto* v = finding(truth, id);
  return v != nullptr && cms::is_present(*v);
}

}  // namespace

qseq::Answer simulated_answer(const cms::ConceptCatalog& catalog, const std::string& question,
                              const Encounter& truth) {
  const cms::Concept& c = catalog.at(question);
  const bool select = c.response_type == cms::ResponseType::kSingleSelect ||
                      c.response_type == cms::ResponseType::kMultiSelect;
  qseq::Answer a;
  if (select && !c.options.empty()) {
    for (const auto& opt : c.options) {
      if (present(truth, opt)) a.selected.push_back(opt);
    }
    if (c.response_type == cms::ResponseType::kSingleSelect) {
      // Exactly one choice is required; fall back to the first option.
      if (a.selected.empty()) a.selected.push_back(c.options.front());
      a.selected.resize(1);
    }
    return a;
  }
  if (c.response_type == cms::ResponseType::kFreeText) {
    a.text = "no further details";
    return a;
  }
  const cms::AssertionValue* v = finding(truth, question);
  switch (c.response_evaluation) {
    case cms::ResponseEvaluation::kOrdinalDuration:
      if (v && std::holds_alternative<cms::DurationDays>(*v)) return qseq::Answer::of(*v);
      return qseq::Answer::of(cms::DurationDays{0});
    case cms::ResponseEvaluation::kOrdinalSeverity:
      if (v && std::holds_alternative<cms::SeverityLevel>(*v)) return qseq::Answer::of(*v);
      return qseq::Answer::of(cms::SeverityLevel{0});
    default:
      return qseq::Answer::of(v && cms::is_present(*v) ? cms::Certainty::kCertain
                                                       : cms::Certainty::kAbsent);
  }
}

// ---------------------------------------------------------------------------
// Whole sessions

Transcript simulate_session(SessionManager& sessions, const cms::ConceptCatalog& catalog,
                            const Encounter& patient) {
  Transcript t;
  util::Json res = sessions.start_session({{"patient_id", patient.patient_id},
                                           {"reason_text", patient.reason_text},
                                           {"chief_complaint", patient.chief_complaints.front()}});
  t.session_id = res.at("session_id").get<std::string>();
  while (!res.at("question").is_null()) {
    const std::string q = res.at("question").at("question_id").get<std::string>();
    t.questions.push_back(q);
    t.provenance.push_back(res.at("question").at("provenance").get<std::string>());
    res = sessions.answer(t.session_id,
                          {{"question_id", q},
                           {"answer", qseq::answer_to_json(simulated_answer(catalog, q, patient))}});
  }
  try {
    t.assessment = sessions.get_assessment(t.session_id);
  } catch (const NotFoundError&) {
    t.status = 404;
  }
  return t;
}

Transcript simulate_http_session(const std::string& host, int port,
                                 const cms::ConceptCatalog& catalog, const Encounter& patient) {
  httplib::Client cli(host, port);
  Transcript t;
  auto post = [&](const std::string& path, const util::Json& body) {
    auto r = cli.Post(path, body.dump(), "application/json");
    if (!r) throw Error("HTTP request to " + path + " failed");
    if (r->status != 200) {
      t.status = r->status;
      throw Error("HTTP " + std::to_string(r->status) + " from " + path + ": " + r->body);
    }
    return util::Json::parse(r->body);
  };
  util::Json res = post("/sessions", {{"patient_id", patient.patient_id},
                                      {"reason_text", patient.reason_text},
                                      {"chief_complaint", patient.chief_complaints.front()}});
  t.session_id = res.at("session_id").get<std::string>();
  while (!res.at("question").is_null()) {
    const std::string q = res.at("question").at("question_id").get<std::string>();
    t.questions.push_back(q);
    t.provenance.push_back(res.at("question").at("provenance").get<std::string>());
    res = post("/sessions/" + t.session_id + "/answers",
               {{"question_id", q},
                {"answer", qseq::answer_to_json(simulated_answer(catalog, q, patient))}});
  }
  auto r = cli.Get("/sessions/" + t.session_id + "/assessment");
  if (!r) throw Error("HTTP assessment request failed");
  if (r->status == 200) {
    t.assessment = util::Json::parse(r->body);
  } else {
    t.status = r->status;
  }
  return t;
}

// ---------------------------------------------------------------------------
// World fixtures

FixtureConfig small_fixture_config() {
  FixtureConfig c;
  c.world.n_chief_complaints = 5;
  c.world.n_conditions = 15;
  c.world.conditions_per_cc = 3;
  c.world.n_concepts = 60;
  c.world.n_background_diagnoses = 8;
  c.world.n_medications = 16;
  c.world.n_labs = 16;
  c.world.n_imaging = 8;
  c.world.female_only_concepts = 2;
  c.prepare.min_count = 60;
  c.forest.n_trees = 30;
  c.forest.max_depth = 10;
  return c;
}

WorldFixture build_fixture(std::uint64_t seed, const FixtureConfig& config) {
  WorldFixture fx;
  fx.world = datagen::build_world(seed, config.world);
  fx.kb = qseq::KnowledgeBase::from_json(datagen::generate_kb(fx.world), fx.world.catalog);
  fx.train = datagen::sample_dataset(fx.world, config.n_train, 365, 0);
  fx.test = datagen::sample_dataset(fx.world, config.n_test, 365, 1);

  fx.forests = train_cohort_forests(fx, config, seed);
  return fx;
}

// ---------------------------------------------------------------------------
// Policy comparison

qseq::SessionState run_policy(const WorldFixture& fx, const forest::CohortForest& forest,
                              const Encounter& patient, Policy policy, int n_questions,
                              std::mt19937_64& rng) {
  const qseq::Engine engine{&fx.world.catalog, &fx.kb, &forest};
  qseq::SessionState s = qseq::new_session("sim", patient.cohort(), patient.age_years,
                                           patient.history, n_questions);
  s.phase = qseq::Phase::kMlQuestions;
  std::vector<std::string> pool;
  for (std::size_t f = 0; f < forest.schema.n_concepts(); ++f) {
    pool.push_back(fx.world.catalog.question_for(forest.schema.feature_name(f)));
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  for (int i = 0; i < n_questions; ++i) {
    std::string q;
    if (policy == Policy::kForest) {
      auto choice = qseq::select_next_question(s, engine);
      if (!choice) break;
      q = choice->question;
    } else {
      const auto inferred = qseq::infer_assertions(s.asserted, s.inferred, fx.kb.inference_rules);
      s.asserted = inferred.asserted;
      s.inferred = inferred.provenance;
      qseq::Votes votes;
      for (const auto& p : pool) votes[p] = 1;
      votes = qseq::apply_prerequisites(votes, fx.kb.prerequisites, s.asserted);
      votes = qseq::apply_fixers(votes, fx.kb.fixers, s.cohort, s.asserted);
      std::vector<std::string> open;
      for (const auto& [id, w] : votes) {
        if (w > 0 && !s.asserted.count(id) && !s.was_asked(id)) open.push_back(id);
      }
      if (open.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      q = open[pick(rng)];
      s.pending = qseq::QuestionChoice{q, "ml", 0, 0, {}};
    }
    qseq::record_answer(s, q, simulated_answer(fx.world.catalog, q, patient), engine);
  }
  const auto inferred = qseq::infer_assertions(s.asserted, s.inferred, fx.kb.inference_rules);
  s.asserted = inferred.asserted;
  s.inferred = inferred.provenance;
  return s;
}

double oracle_cross_entropy(const datagen::WorldModel& world, const CohortKey& cohort,
                            const qseq::SessionState& state, const Encounter& patient) {
  std::vector<cms::Assertion> evidence;
  for (const auto& [id, a] : state.asserted) evidence.push_back(a);
  const auto post = datagen::true_posterior(world, cohort, evidence);
  const std::size_t k = patient.latent.condition < 0
                            ? world.conditions.size()
                            : static_cast<std::size_t>(patient.latent.condition);
  return -std::log(std::max(post.conditions[k], 1e-12));
}

util::Json PolicyReport::to_json() const {
  util::Json rows = util::Json::array();
  for (const auto& w : worlds) {
    rows.push_back({{"seed", w.seed},
                    {"sessions", w.n_sessions},
                    {"forest_cross_entropy", w.forest_ce},
                    {"random_cross_entropy", w.random_ce}});
  }
  return {{"worlds", rows}, {"wins", wins}, {"losses", losses}, {"p_value", p_value}};
}

PolicyReport compare_policies(const PolicyConfig& config) {
  PolicyReport report;
  for (int w = 0; w < config.n_worlds; ++w) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(w);
    const WorldFixture fx = build_fixture(seed, config.fixture);
    PolicyWorldResult r;
    r.seed = seed;
    std::mt19937_64 rng(seed ^ 0xa0761d6478bd642fULL);
    for (const auto& e : fx.test) {
      if (r.n_sessions >= config.sessions_per_world) break;
      auto it = fx.forests.find(e.cohort());
      if (it == fx.forests.end()) continue;
      const auto ml = run_policy(fx, it->second, e, Policy::kForest, config.n_questions, rng);
      const auto rnd = run_policy(fx, it->second, e, Policy::kRandom, config.n_questions, rng);
      r.forest_ce += oracle_cross_entropy(fx.world, e.cohort(), ml, e);
      r.random_ce += oracle_cross_entropy(fx.world, e.cohort(), rnd, e);
      ++r.n_sessions;
    }
    if (r.n_sessions > 0) {
      r.forest_ce /= r.n_sessions;
      r.random_ce /= r.n_sessions;
      if (r.forest_ce < r.random_ce) ++report.wins;
      if (r.forest_ce > r.random_ce) ++report.losses;
    }
    report.worlds.push_back(r);
  }
  report.p_value = stats::sign_test_p(report.wins, report.losses);
  return report;
}

}  // namespace triage::service

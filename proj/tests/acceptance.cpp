// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "service_fixture.hpp"
#include "triage/cc/cc_classifier.hpp"
#include "triage/neural/grad_check.hpp"
#include "triage/neural/loss_weight_search.hpp"
#include "triage/qseq/rules.hpp"
#include "triage/qseq/vote.hpp"
#include "triage/service/experiments.hpp"
#include "triage/service/http_server.hpp"
#include "triage/stats/lift.hpp"
#include "triage/stats/metrics.hpp"
#include "triage/util/log.hpp"

namespace {

using namespace triage;
namespace fs = std::filesystem;

// Collects mismatches; the first few are kept for the report line.
struct Check {
  int failures = 0;
  std::ostringstream first;
  std::ostringstream info;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures < 3) first << (failures ? "; " : "") << what;
    ++failures;
  }
  template <typename T>
  Check& note(const T& v) {
    info << v;
    return *this;
  }
};

int g_failed = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_seconds > 0 && secs > limit_seconds) {
    c.expect(false, "runtime " + std::to_string(secs) + " s over the " +
                        std::to_string(limit_seconds) + " s limit");
  }
  const bool pass = c.failures == 0;
  if (!pass) ++g_failed;
  std::cout << (pass ? "PASS " : "FAIL ") << name << " (" << std::fixed
            << std::setprecision(1) << secs << " s)";
  if (!c.info.str().empty()) std::cout << " " << c.info.str();
  if (!pass) std::cout << " | " << c.failures << " mismatch(es): " << c.first.str();
  std::cout << std::endl;
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

// ---------------------------------------------------------------------------

void lift_oracle(Check& c) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n_rows = 20 + static_cast<std::size_t>(trial) * 20;  // up to 1000
    const auto rows = oracle::random_lift_rows(rng, n_rows, 4, 5);
    const stats::LiftTable table = stats::bayesian_lift(rows);
    std::size_t present = 0;
    stats::TargetSet expect_kept;
    for (const auto& [key, k] : oracle::brute_lift(rows)) {
      if (k.cc == 0 || k.target == 0) continue;
      ++present;
      const stats::LiftEntry* e = table.find(key.first, key.second);
      c.expect(e != nullptr && e->joint == k.joint && e->lift == oracle::lift_of(k, n_rows),
               "lift mismatch in table " + std::to_string(trial));
      if (oracle::lift_exceeds(k, n_rows, 2, 1) && k.joint >= 1) expect_kept.insert(key);
    }
    c.expect(table.entries.size() == present, "entry count in table " + std::to_string(trial));
    c.expect(stats::filter_targets(table, 2.0, 1) == expect_kept,
             "threshold filter in table " + std::to_string(trial));
  }
  // A lift of exactly 2 is excluded.
  std::vector<stats::LiftRow> rows(6);
  for (int i = 0; i < 3; ++i) rows[i].chief_complaints = {"c"};
  rows[0].targets = {"t"};
  const auto t = stats::bayesian_lift(rows);
  c.expect(t.find("t", "c")->lift == 2.0 && stats::filter_targets(t, 2.0, 1).empty(),
           "lift of exactly 2 kept");
  c.note("50 tables of 20..1000 rows");
}

void vote_equivalence(Check& c) {
  std::mt19937_64 rng(77);
  int rows = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = oracle::random_hand_forest(rng, 8, 10, 4);
    for (int k = 0; k < 10; ++k) {
      const auto a = oracle::random_assertions(f, rng);
      const auto row = forest::encode_row(f.schema, static_cast<int>(rng() % 90), a, {});
      c.expect(qseq::forest_vote(f, row) == oracle::naive_vote(f, row),
               "forest " + std::to_string(trial));
      ++rows;
    }
  }
  c.note("100 forests, ").note(rows).note(" assertion sets");
}

void prerequisite_semantics(Check& c) {
  using cms::Certainty;
  const std::vector<qseq::PrerequisiteRule> rules{{"pain_duration", "pain", true},
                                                 {"pain_severity", "pain", true}};
  const qseq::Votes in{{"pain_duration", 7}, {"pain_severity", 4}, {"fever", 1}};
  const qseq::AssertedMap absent{{"pain", {"pain", Certainty::kAbsent}}};
  c.expect(qseq::apply_prerequisites(in, rules, absent) ==
               qseq::Votes{{"pain_duration", 0}, {"pain_severity", 0}, {"fever", 1}},
           "absent prerequisite");
  const qseq::AssertedMap certain{{"pain", {"pain", Certainty::kCertain}}};
  c.expect(qseq::apply_prerequisites(in, rules, certain) == in, "certain prerequisite");
  c.expect(qseq::apply_prerequisites(in, rules, {}) == qseq::Votes{{"pain", 11}, {"fever", 1}},
           "unanswered prerequisite");
  qseq::Votes with_own = in;
  with_own["pain"] = 2;
  c.expect(qseq::apply_prerequisites(with_own, rules, {}) ==
               qseq::Votes{{"pain", 13}, {"fever", 1}},
           "summation onto the prerequisite's own votes");
}

void metric_references(Check& c) {
  for (const auto& f : oracle::metric_fixtures()) {
    const auto m = stats::rank_metrics(f.scores, f.truth);
    c.expect(std::abs(m.micro_pr_auc - f.pr_auc) <= 1e-9, f.name + " PR-AUC");
    c.expect(std::abs(m.micro_roc_auc - f.roc_auc) <= 1e-9, f.name + " ROC-AUC");
    c.expect(std::abs(m.ndcg - f.ndcg) <= 1e-9, f.name + " nDCG");
  }
  const auto ex = stats::rank_metrics({{0.9, 0.8, 0.1}}, {{1, 0, 1}});
  c.expect(std::abs(ex.ndcg - 0.9197) < 5e-5, "nDCG example " + fmt(ex.ndcg));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  stats::ScoreMatrix s(800, std::vector<double>(1));
  stats::TruthMatrix t(800, std::vector<char>(1));
  long pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i][0] = u(rng);
    t[i][0] = static_cast<char>(u(rng) < 0.5);
    pos += t[i][0];
  }
  const long pairs = pos * (800 - pos);
  const double roc = stats::rank_metrics(s, t).micro_roc_auc;
  c.expect(pairs >= 100000, "too few pairs");
  c.expect(std::abs(roc - 0.5) <= 0.02, "random ROC-AUC " + fmt(roc));
  c.note(oracle::metric_fixtures().size()).note(" fixtures; random ROC-AUC ").note(fmt(roc))
      .note(" over ").note(pairs).note(" pairs");
}

void gradient_checks(Check& c) {
  auto targets = neural::standard_grad_check_targets(2);
  targets.push_back(cc::cc_grad_check_target(2));
  double worst = 0.0;
  std::set<std::string> names;
  for (const auto& t : targets) {
    const double err = neural::gradient_check(t);
    worst = std::max(worst, err);
    names.insert(t.name);
    c.expect(err < 1e-4, t.name + " error " + std::to_string(err));
  }
  for (const char* required : {"dense+bce", "lstm-step", "lstm-rollout", "skip-trunk",
                               "head-diagnoses", "head-medications", "head-labs",
                               "head-imaging"}) {
    c.expect(names.count(required) == 1, std::string("missing target ") + required);
  }
  c.note(targets.size()).note(" targets; max relative error ").note(worst);
}

void loss_weight_search(Check& c) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    neural::HeadTable table(10);
    std::vector<std::array<double, 4>> plain(10);
    for (int i = 0; i < 10; ++i) {
      for (int h = 0; h < 4; ++h) table[i][h] = plain[i][h] = 0.4 + level(rng) / 10.0;
    }
    c.expect(neural::select_max_min_rank(table) == oracle::max_min_rank(plain),
             "stub table " + std::to_string(trial));
  }

  service::FixtureConfig fc = service::small_fixture_config();
  fc.max_cohorts = 0;
  const auto fx = service::build_fixture(31, fc);
  neural::AssessmentConfig ac;
  ac.target_min_count = 30;
  ac.epochs = 4;
  const auto schema = neural::build_assessment_schema(fx.train, fx.world.catalog, ac);
  const auto train = neural::make_examples(schema, fx.train, ac);
  const auto eval = neural::make_examples(schema, fx.test, ac);
  const auto run = [&] {
    return neural::loss_weight_search(schema, train, eval, ac,
                                      neural::default_weight_candidates(), 10, 0.05, 8);
  };
  const auto a = run();
  const auto b = run();
  c.expect(a.tuples.size() == 10 && a.pr_auc.size() == 10, "trial count");
  c.expect(a.n_train == static_cast<std::size_t>(std::llround(0.05 * train.size())),
           "sample size " + std::to_string(a.n_train));
  c.expect(a.to_json() == b.to_json(), "same seed gave a different report");
  c.expect(a.chosen == neural::select_max_min_rank(a.pr_auc), "chosen tuple");
  c.note("20 stub tables; real search: ").note(a.tuples.size()).note(" trials on ")
      .note(a.n_train).note("/").note(train.size()).note(" examples");
}

void policy_informativeness(Check& c) {
  const service::PolicyReport r = service::compare_policies(service::PolicyConfig{});
  double ml = 0.0;
  double rnd = 0.0;
  for (const auto& w : r.worlds) {
    ml += w.forest_ce / r.worlds.size();
    rnd += w.random_ce / r.worlds.size();
  }
  c.expect(r.worlds.size() >= 20, "fewer than 20 worlds");
  c.expect(r.p_value < 0.05, "sign test p = " + fmt(r.p_value, 6));
  c.note(r.worlds.size()).note(" worlds, forest wins ").note(r.wins).note("/")
      .note(r.wins + r.losses).note(", mean cross-entropy ").note(fmt(ml)).note(" vs random ")
      .note(fmt(rnd)).note(", p = ").note(fmt(r.p_value, 6));
}

void history_ablation(Check& c) {
  const auto config = service::history_ablation_config();
  const service::AblationReport r = service::history_ablation(config);
  c.expect(config.n_seeds >= 10, "fewer than 10 seeds");
  const std::pair<const char*, const service::DirectionResult*> arms[] = {
      {"qs", &r.qs}, {"assessment", &r.assessment}, {"cc", &r.cc}};
  for (const auto& [name, d] : arms) {
    c.expect(d->wins > d->losses && d->p_value < 0.05,
             std::string(name) + " wins " + std::to_string(d->wins) + " losses " +
                 std::to_string(d->losses));
    c.note(name).note(" ").note(d->wins).note("-").note(d->losses).note(" p=")
        .note(fmt(d->p_value, 4)).note(name == arms[2].first ? "" : "; ");
  }
}

void depth_vs_logistic(Check& c) {
  const auto config = service::history_ablation_config();
  const service::DepthReport r = service::depth_vs_logistic(1, config.fixture, config.assessment);
  const char* heads[] = {"diagnoses", "medications", "labs", "imaging"};
  c.expect(config.assessment.depth == 7, "trunk is not seven layers deep");
  for (int h = 0; h < neural::kNumHeads; ++h) {
    c.expect(r.deep[h] >= r.logistic[h], std::string(heads[h]) + " deep " + fmt(r.deep[h]) +
                                             " < logistic " + fmt(r.logistic[h]));
    c.note(h ? " " : "").note(heads[h]).note(" ").note(fmt(r.deep[h], 3)).note("/")
        .note(fmt(r.logistic[h], 3));
  }
}

const testing::ServiceFixture& service_fixture() {
  static const testing::ServiceFixture s = testing::make_service_fixture(23);
  return s;
}

void end_to_end_replay(Check& c) {
  const auto& sf = service_fixture();
  service::ServiceConfig config;
  config.log_dir = (fs::temp_directory_path() / "triage_acceptance_logs").string();
  fs::remove_all(config.log_dir);
  service::SessionManager live(sf.bundle, sf.patients, config);
  service::HttpServer server(live);
  const int port = server.bind_any_port("127.0.0.1");
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  service::ServiceConfig no_log = config;
  no_log.log_dir.clear();
  const service::SessionManager replayer(sf.bundle, sf.patients, no_log);
  int sessions = 0;
  int ml_sessions = 0;
  std::size_t max_questions = 0;
  for (std::size_t i = 0; i < 100 && i < sf.fx.test.size(); ++i) {
    const Encounter& e = sf.fx.test[i];
    const std::string tag = "session " + std::to_string(i);
    const service::Transcript t =
        service::simulate_http_session("127.0.0.1", port, sf.bundle.catalog, e);
    ++sessions;
    const auto events = service::SessionManager::read_event_log(live.event_log_path(t.session_id));
    const service::SessionRecord back = replayer.replay(events);
    std::vector<std::string> replayed;
    for (const auto& q : back.issued) replayed.push_back(q.question);
    c.expect(replayed == t.questions, tag + ": question sequence differs");
    if (back.assessment) {
      c.expect(!t.assessment.is_null() &&
                   replayer.assessment_json(back) == t.assessment.at("assessment"),
               tag + ": assessment differs");
    } else {
      c.expect(t.assessment.is_null(), tag + ": assessment missing after replay");
    }
    const auto ml = std::count(t.provenance.begin(), t.provenance.end(), "ml");
    ml_sessions += ml > 0;
    const std::size_t scripted = sf.bundle.kb.script_for(back.chosen_cc).size();
    c.expect(ml <= config.budget && t.questions.size() <= scripted + config.budget,
             tag + ": too many questions");
    max_questions = std::max(max_questions, t.questions.size());
    // Each question, at the moment it was issued, was neither asserted nor asked.
    for (std::size_t k = 1; k <= events.size(); ++k) {
      const service::SessionRecord r = replayer.replay({events.begin(), events.begin() + k});
      if (!r.state.pending) continue;
      const std::string& q = r.state.pending->question;
      c.expect(!r.state.asserted.count(q), tag + ": asked asserted concept " + q);
      c.expect(std::count(r.state.asked.begin(), r.state.asked.end(), q) == 0,
               tag + ": repeated " + q);
    }
  }
  server.stop();
  serving.join();
  fs::remove_all(config.log_dir);
  c.expect(sessions == 100, "fewer than 100 sessions");
  c.note(sessions).note(" HTTP sessions (").note(ml_sessions)
      .note(" with forest questions), at most ").note(max_questions).note(" questions");
}

template <typename A, typename B>
bool same_json_file(const A& a, const B& b) {
  return a.to_json().dump() == b.to_json().dump();
}

void round_trip_persistence(Check& c) {
  const auto& sf = service_fixture();
  const fs::path dir = fs::temp_directory_path() / "triage_acceptance_bundle";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<const Encounter*> probe;
  for (std::size_t i = 0; i < 100; ++i) probe.push_back(&sf.fx.test[i]);

  // Forests.
  for (const auto& [key, f] : sf.bundle.forests) {
    const fs::path p = dir / (key.file_stem() + ".cbor");
    f.save(p);
    const forest::CohortForest back = forest::CohortForest::load(p);
    for (const Encounter* e : probe) {
      const auto row = f.encode(e->age_years, e->assertions, e->history);
      c.expect(back.predict_proba(row.values) == f.predict_proba(row.values),
               "forest " + key.file_stem());
    }
  }
  // Chief-complaint model.
  const cc::CcModel& ccm = *sf.bundle.cc_model;
  ccm.save(dir / "cc.cbor");
  const cc::CcModel cc_back = cc::CcModel::load(dir / "cc.cbor");
  for (const Encounter* e : probe) {
    c.expect(cc_back.classifier.predict(cc_back.make_example(*e)) ==
                 ccm.classifier.predict(ccm.make_example(*e)),
             "cc model");
  }
  // Assessment model and logistic baseline.
  const neural::AssessmentModel& am = *sf.bundle.assessment;
  std::vector<neural::AssessmentExample> xs;
  for (const Encounter* e : probe) xs.push_back(neural::make_example(am.schema(), *e, am.config()));
  util::write_cbor_file(dir / "assessment.cbor", am.to_json());
  const auto am_back = neural::AssessmentModel::from_json(util::read_cbor_file(dir / "assessment.cbor"));
  neural::AssessmentConfig lc = am.config();
  lc.epochs = 2;
  const auto train = neural::make_examples(am.schema(), sf.fx.train, lc);
  const neural::LogisticBaseline lr = neural::train_logistic_baseline(am.schema(), train, lc);
  util::write_cbor_file(dir / "logistic.cbor", lr.to_json());
  const auto lr_back = neural::LogisticBaseline::from_json(util::read_cbor_file(dir / "logistic.cbor"));
  for (const auto& x : xs) {
    c.expect(am_back.predict(x) == am.predict(x), "assessment model");
    c.expect(lr_back.predict(x) == lr.predict(x), "logistic baseline");
  }
  // Whole bundle.
  service::persist_models(sf.bundle, dir / "bundle");
  const service::ModelBundle b = service::load_models(dir / "bundle");
  c.expect(same_json_file(b.catalog, sf.bundle.catalog), "bundle catalog");
  c.expect(same_json_file(b.kb, sf.bundle.kb), "bundle knowledge base");
  c.expect(b.forests.size() == sf.bundle.forests.size() && b.rules_only.empty(), "bundle forests");
  for (const Encounter* e : probe) {
    if (const auto* f = sf.bundle.forest_for(e->cohort())) {
      const auto row = f->encode(e->age_years, e->assertions, e->history);
      c.expect(b.forest_for(e->cohort())->predict_proba(row.values) == f->predict_proba(row.values),
               "bundle forest");
    }
    c.expect(b.cc_model->classifier.predict(b.cc_model->make_example(*e)) ==
                 ccm.classifier.predict(ccm.make_example(*e)),
             "bundle cc model");
    const auto x = neural::make_example(am.schema(), *e, am.config());
    c.expect(b.assessment->predict(x) == am.predict(x), "bundle assessment");
  }
  fs::remove_all(dir);
  c.note(sf.bundle.forests.size()).note(" forests, cc, assessment, logistic and bundle on ")
      .note(probe.size()).note(" probes");
}

}  // namespace

int main() {
  util::set_log_level(util::LogLevel::kError);
  criterion("lift-oracle", 5, lift_oracle);
  criterion("forest-vote-equivalence", 10, vote_equivalence);
  criterion("prerequisite-semantics", 0, prerequisite_semantics);
  criterion("metric-references", 0, metric_references);
  criterion("gradient-checks", 0, gradient_checks);
  criterion("loss-weight-search", 0, loss_weight_search);
  criterion("policy-informativeness", 300, policy_informativeness);
  criterion("history-ablation-directions", 900, history_ablation);
  criterion("depth-vs-logistic", 0, depth_vs_logistic);
  criterion("end-to-end-replay", 0, end_to_end_replay);
  criterion("round-trip-persistence", 0, round_trip_persistence);
  std::cout << (g_failed == 0 ? "ALL PASS" : std::to_string(g_failed) + " FAILED") << std::endl;
  return g_failed;
}

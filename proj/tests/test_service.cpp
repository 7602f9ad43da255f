#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "service_fixture.hpp"
// After Eigen: httplib pulls in system headers whose macros break Eigen.
#include "httplib.h"
#include "triage/error.hpp"
#include "triage/service/http_server.hpp"

namespace triage::service {
namespace {

namespace fs = std::filesystem;
using triage::testing::ServiceFixture;

const ServiceFixture& fixture() {
  static const ServiceFixture s = triage::testing::make_service_fixture(17);
  return s;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("triage_svc_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const Encounter& forest_patient(std::size_t i = 0) {
  return *triage::testing::forest_patients(fixture(), i + 1).at(i);
}

util::Json start_for(const Encounter& e) {
  return {{"patient_id", e.patient_id},
          {"reason_text", e.reason_text},
          {"chief_complaint", e.chief_complaints.front()}};
}

util::Json reply_to(const util::Json& question, const Encounter& e) {
  const std::string q = question.at("question_id").get<std::string>();
  return {{"question_id", q},
          {"answer", qseq::answer_to_json(simulated_answer(fixture().bundle.catalog, q, e))}};
}

TEST(SessionStart, CandidatesClearThresholdAndCap) {
  SessionManager m(fixture().bundle, fixture().patients, {});
  int checked = 0;
  for (const auto* e : triage::testing::forest_patients(fixture(), 20)) {
    util::Json res;
    try {
      res = m.start_session({{"patient_id", e->patient_id}, {"reason_text", e->reason_text}});
    } catch (const PreconditionError&) {
      continue;  // no candidate reached the threshold
    }
    const auto& cands = res.at("cc_candidates");
    ASSERT_GE(cands.size(), 1u);
    ASSERT_LE(cands.size(), 5u);
    for (const auto& c : cands) EXPECT_GE(c.at("score").get<double>(), 0.05);
    EXPECT_EQ(res.at("chief_complaint"), cands.front().at("chief_complaint"));
    EXPECT_FALSE(res.at("cc_overridden").get<bool>());
    ++checked;
  }
  EXPECT_GE(checked, 15);
}

TEST(SessionStart, UnknownPatientAndEmptyText) {
  SessionManager m(fixture().bundle, fixture().patients, {});
  EXPECT_THROW(m.start_session({{"patient_id", "nobody"}, {"reason_text", "cough"}}),
               NotFoundError);
  EXPECT_THROW(m.start_session({{"patient_id", forest_patient().patient_id},
                                {"reason_text", "   "}}),
               ValidationError);
  EXPECT_THROW(m.start_session({{"patient_id", forest_patient().patient_id},
                                {"reason_text", "cough"},
                                {"chief_complaint", "not_a_complaint"}}),
               ValidationError);
}

TEST(SessionStart, DistinctSessionIds) {
  SessionManager m(fixture().bundle, fixture().patients, {});
  const auto a = m.start_session(start_for(forest_patient()));
  const auto b = m.start_session(start_for(forest_patient()));
  EXPECT_NE(a.at("session_id"), b.at("session_id"));
  EXPECT_FALSE(a.at("question").is_null());
}

TEST(SessionAnswer, DuplicateConflictsAndDoneIsGone) {
  SessionManager m(fixture().bundle, fixture().patients, {});
  const Encounter& e = forest_patient();
  util::Json res = m.start_session(start_for(e));
  const std::string id = res.at("session_id");
  EXPECT_THROW(m.get_assessment(id), PreconditionError);
  const util::Json first = reply_to(res.at("question"), e);
  res = m.answer(id, first);
  EXPECT_THROW(m.answer(id, first), ConflictError);
  util::Json last = first;
  while (!res.at("question").is_null()) {
    EXPECT_FALSE(res.at("assessment_ready").get<bool>());
    last = reply_to(res.at("question"), e);
    res = m.answer(id, last);
  }
  EXPECT_TRUE(res.at("assessment_ready").get<bool>());
  EXPECT_EQ(res.at("phase"), "done");
  EXPECT_THROW(m.answer(id, last), GoneError);
  EXPECT_THROW(m.answer("s_missing", last), NotFoundError);
  const util::Json a = m.get_assessment(id);
  EXPECT_FALSE(a.at("assessment").at("diagnoses").empty());
}

TEST(SessionAnswer, QuestionCountWithinScriptPlusBudget) {
  ServiceConfig c;
  c.budget = 4;
  SessionManager m(fixture().bundle, fixture().patients, c);
  for (const auto* e : triage::testing::forest_patients(fixture(), 10)) {
    const Transcript t = simulate_session(m, fixture().bundle.catalog, *e);
    const auto ml = std::count(t.provenance.begin(), t.provenance.end(), "ml");
    EXPECT_LE(ml, 4);
    EXPECT_EQ(m.snapshot(t.session_id).state.remaining_budget, 4 - ml);
    std::set<std::string> seen;
    for (const auto& q : t.questions) EXPECT_TRUE(seen.insert(q).second) << q;
  }
}

TEST(ProviderDocument, SectionsInNoteOrder) {
  SessionManager m(fixture().bundle, fixture().patients, {});
  const Transcript t = simulate_session(m, fixture().bundle.catalog, forest_patient());
  const auto& sections = t.assessment.at("document").at("sections");
  ASSERT_EQ(sections.size(), 4u);
  const char* order[] = {"CC", "HPI", "ROS", "PE"};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(sections[i].at("section"), order[i]);
  EXPECT_EQ(sections[0].at("entries")[0].at("chief_complaint"),
            forest_patient().chief_complaints.front());
  // Every recorded assertion appears exactly once.
  const SessionRecord r = m.snapshot(t.session_id);
  std::size_t entries = 0;
  for (int i = 1; i < 4; ++i) entries += sections[i].at("entries").size();
  EXPECT_EQ(entries, r.state.asserted.size());
}

TEST(ProviderDocument, AllDeniedGivesOnlyNegativeFindings) {
  const auto catalog = cms::ConceptCatalog::load(fs::path(TRIAGE_SOURCE_DIR) /
                                                 "data/demo/catalog.json");
  SessionRecord r;
  r.session_id = "s_doc";
  r.chosen_cc = "ankle_pain";
  r.reason_text = "my ankle hurts";
  for (const char* id : {"ankle_pain", "cough", "fever", "ankle_swelling"}) {
    r.state.asked.push_back(id);
    r.state.asserted[id] = {id, cms::Certainty::kAbsent};
  }
  const util::Json doc = provider_document(catalog, r);
  int n = 0;
  for (std::size_t s = 1; s < 4; ++s) {
    for (const auto& entry : doc.at("sections")[s].at("entries")) {
      EXPECT_EQ(entry.at("sense"), "negative");
      EXPECT_EQ(entry.at("phrase").get<std::string>().rfind("Patient denies ", 0), 0u);
      ++n;
    }
  }
  EXPECT_EQ(n, 4);
  EXPECT_EQ(doc.at("sections")[3].at("entries")[0].at("concept_id"), "ankle_swelling");
  EXPECT_EQ(doc.at("sections")[2].at("entries").size(), 2u);
}

TEST(Feedback, ToggleAndVenue) {
  SessionManager m(fixture().bundle, fixture().patients, {});
  const std::string id = m.start_session(start_for(forest_patient())).at("session_id");
  auto res = m.feedback(id, {{"toggle_diagnosis", "D7"}});
  EXPECT_EQ(res.at("accepted_diagnoses"), util::Json::array({"D7"}));
  EXPECT_TRUE(res.at("venue_of_care").is_null());
  res = m.feedback(id, {{"toggle_diagnosis", "D7"}, {"venue_of_care", "urgent_care"}});
  EXPECT_TRUE(res.at("accepted_diagnoses").empty());
  EXPECT_EQ(res.at("venue_of_care"), "urgent_care");
  EXPECT_THROW(m.feedback(id, {{"venue_of_care", "hospital_roof"}}), ValidationError);
}

TEST(EventLog, ReplayRebuildsRecord) {
  ServiceConfig c;
  c.log_dir = scratch_dir("replay").string();
  SessionManager m(fixture().bundle, fixture().patients, c);
  for (const auto* e : triage::testing::forest_patients(fixture(), 5)) {
    const Transcript t = simulate_session(m, fixture().bundle.catalog, *e);
    m.feedback(t.session_id, {{"toggle_diagnosis", "X1"}});
    const SessionRecord live = m.snapshot(t.session_id);
    const SessionRecord back =
        m.replay(SessionManager::read_event_log(m.event_log_path(t.session_id)));
    ASSERT_EQ(back.issued.size(), live.issued.size());
    for (std::size_t i = 0; i < live.issued.size(); ++i) {
      EXPECT_EQ(back.issued[i].question, live.issued[i].question);
    }
    EXPECT_EQ(m.assessment_json(back), m.assessment_json(live));
    EXPECT_EQ(back.feedback.accepted_diagnoses, live.feedback.accepted_diagnoses);
    EXPECT_EQ(back.events, live.events);
  }
  EXPECT_THROW(m.replay({}), SchemaError);
  fs::remove_all(c.log_dir);
}

TEST(Bundle, RoundTripServesIdenticalSessions) {
  const fs::path dir = scratch_dir("bundle_rt");
  persist_models(fixture().bundle, dir);
  const ModelBundle back = load_models(dir);
  EXPECT_EQ(back.forests.size(), fixture().bundle.forests.size());
  SessionManager a(fixture().bundle, fixture().patients, {});
  SessionManager b(back, fixture().patients, {});
  for (const auto* e : triage::testing::forest_patients(fixture(), 5)) {
    const Transcript ta = simulate_session(a, fixture().bundle.catalog, *e);
    const Transcript tb = simulate_session(b, back.catalog, *e);
    EXPECT_EQ(ta.questions, tb.questions);
    EXPECT_EQ(ta.assessment.at("assessment"), tb.assessment.at("assessment"));
  }
  fs::remove_all(dir);
}

TEST(Bundle, CorruptedFileIsIntegrityError) {
  const fs::path dir = scratch_dir("bundle_bad");
  persist_models(fixture().bundle, dir);
  std::ofstream(dir / "kb.json", std::ios::app) << " ";
  EXPECT_THROW(load_models(dir), IntegrityError);
  fs::remove(dir / "kb.json");
  EXPECT_THROW(load_models(dir), IntegrityError);
  fs::remove_all(dir);
  EXPECT_THROW(load_models(dir), IntegrityError);
}

TEST(Bundle, MissingForestFallsBackToRules) {
  const fs::path dir = scratch_dir("bundle_rules");
  persist_models(fixture().bundle, dir);
  const CohortKey key = forest_patient().cohort();
  fs::remove(dir / "forests" / (key.file_stem() + ".cbor"));
  const ModelBundle back = load_models(dir);
  EXPECT_TRUE(back.rules_only.count(key));
  EXPECT_EQ(back.forest_for(key), nullptr);
  SessionManager m(back, fixture().patients, {});
  const util::Json res = m.start_session(start_for(forest_patient()));
  EXPECT_TRUE(res.at("rules_only").get<bool>());
  const Transcript t = simulate_session(m, back.catalog, forest_patient());
  for (const auto& p : t.provenance) EXPECT_NE(p, "ml");
  fs::remove_all(dir);
}

TEST(Bundle, VersionMismatchIsRejected) {
  const fs::path dir = scratch_dir("bundle_version");
  persist_models(fixture().bundle, dir);
  util::Json manifest = util::read_json_file(dir / "manifest.json");
  manifest["version"] = kBundleFormatVersion + 1;
  util::write_json_file(dir / "manifest.json", manifest);
  EXPECT_THROW(load_models(dir), IncompatibleVersionError);
  fs::remove_all(dir);
}

TEST(Http, StatusMapping) {
  EXPECT_EQ(status_for(NotFoundError("x")), 404);
  EXPECT_EQ(status_for(ConflictError("x")), 409);
  EXPECT_EQ(status_for(GoneError("x")), 410);
  EXPECT_EQ(status_for(PreconditionError("x")), 412);
  EXPECT_EQ(status_for(ValidationError("x")), 400);
  EXPECT_EQ(status_for(SchemaError("x")), 400);
  EXPECT_EQ(status_for(IncompatibleVersionError("x")), 409);
  EXPECT_EQ(status_for(std::runtime_error("x")), 500);
  EXPECT_EQ(error_body(GoneError("done")).at("error"), "gone");
}

class HttpSession : public ::testing::Test {
 protected:
  void SetUp() override {
    manager_ = std::make_unique<SessionManager>(fixture().bundle, fixture().patients,
                                                ServiceConfig{});
    server_ = std::make_unique<HttpServer>(*manager_);
    port_ = server_->bind_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  void TearDown() override {
    server_->stop();
    if (thread_.joinable()) thread_.join();
  }

  std::unique_ptr<SessionManager> manager_;
  std::unique_ptr<HttpServer> server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpSession, WholeSessionMatchesInProcess) {
  const Encounter& e = forest_patient(1);
  const Transcript http = simulate_http_session("127.0.0.1", port_, fixture().bundle.catalog, e);
  EXPECT_EQ(http.status, 200);
  SessionManager local(fixture().bundle, fixture().patients, {});
  const Transcript direct = simulate_session(local, fixture().bundle.catalog, e);
  EXPECT_EQ(http.questions, direct.questions);
  EXPECT_EQ(http.assessment.at("assessment"), direct.assessment.at("assessment"));
}

TEST_F(HttpSession, ErrorStatuses) {
  httplib::Client cli("127.0.0.1", port_);
  auto health = cli.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  auto r = cli.Post("/sessions", R"({"patient_id":"nobody","reason_text":"cough"})",
                    "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  r = cli.Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  auto started = cli.Post("/sessions", start_for(forest_patient()).dump(), "application/json");
  ASSERT_EQ(started->status, 200);
  const util::Json s = util::Json::parse(started->body);
  const std::string id = s.at("session_id");
  auto pending = cli.Get("/sessions/" + id + "/assessment");
  EXPECT_EQ(pending->status, 412);
  const util::Json body = reply_to(s.at("question"), forest_patient());
  EXPECT_EQ(cli.Post("/sessions/" + id + "/answers", body.dump(), "application/json")->status, 200);
  auto dup = cli.Post("/sessions/" + id + "/answers", body.dump(), "application/json");
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(util::Json::parse(dup->body).at("error"), "conflict");
  EXPECT_EQ(cli.Get("/sessions/s_missing/assessment")->status, 404);
}

}  // namespace
}  // namespace triage::service

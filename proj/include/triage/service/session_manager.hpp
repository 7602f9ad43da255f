#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "triage/cc/cc_classifier.hpp"
#include "triage/qseq/session.hpp"
#include "triage/service/bundle.hpp"

namespace triage::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model_dir = "models";
  std::string patients_path;  // encounters JSONL used as the patient store
  std::string log_dir;        // empty: sessions are not logged to disk
  int budget = qseq::kDefaultBudget;
  double cc_threshold = 0.05;
  int cc_top_k = 5;

  util::Json to_json() const;
  static ServiceConfig from_json(const util::Json& j);
  // TRIAGE_PORT, TRIAGE_MODEL_DIR, TRIAGE_PATIENTS, TRIAGE_LOG_DIR,
  // TRIAGE_BUDGET, TRIAGE_CC_THRESHOLD, TRIAGE_CC_TOP_K override the fields.
  void apply_env();
  // Defaults, then the file when given, then the environment.
  static ServiceConfig load(const std::optional<std::filesystem::path>& file);
};

struct PatientSnapshot {
  std::string patient_id;
  int age_years = 0;
  Sex sex = Sex::kFemale;
  History history;

  util::Json to_json() const;
  static PatientSnapshot from_json(const util::Json& j);
};

// Demographics and history by patient id. The first encounter seen for a
// patient provides the snapshot.
class PatientStore {
 public:
  void add(PatientSnapshot p);
  void add_encounters(std::span<const Encounter> encounters);
  static PatientStore load(const std::filesystem::path& encounters_jsonl);
  const PatientSnapshot* find(const std::string& patient_id) const;
  std::size_t size() const { return patients_.size(); }

 private:
  std::map<std::string, PatientSnapshot> patients_;
};

enum class VenueOfCare { kSelfCare, kPhoneVideo, kInPersonPrimaryCare, kUrgentCare, kEmergency };
std::string to_string(VenueOfCare v);
VenueOfCare parse_venue(const std::string& s);  // ValidationError

struct Feedback {
  std::optional<VenueOfCare> venue_of_care;
  std::set<std::string> accepted_diagnoses;
};

struct SessionRecord {
  std::string session_id;
  PatientSnapshot patient;
  std::string reason_text;
  std::vector<cc::ScoredCc> predicted;
  std::string chosen_cc;
  bool cc_overridden = false;
  bool rules_only = false;
  qseq::SessionState state;
  std::vector<qseq::QuestionChoice> issued;  // every question in order
  std::optional<neural::Assessment> assessment;
  std::string assessment_error;  // why the assessment is missing after done
  Feedback feedback;
  std::vector<util::Json> events;
};

// Provider view: sections CC, HPI, ROS, PE in that order; every recorded
// assertion appears under its concept's note section with its clinical phrase
// and sense.
util::Json provider_document(const cms::ConceptCatalog& catalog, const SessionRecord& record);

// Owns the live sessions. Models are shared and read-only; operations on one
// session are serialized by that session's mutex. Every state change is an
// event appended to <log_dir>/<session_id>.jsonl; replaying the events
// against the same models rebuilds the record exactly.
class SessionManager {
 public:
  SessionManager(const ModelBundle& models, const PatientStore& patients, ServiceConfig config);

  // {patient_id, reason_text, chief_complaint?}. NotFoundError for an unknown
  // patient; ValidationError for empty text; PreconditionError when no
  // candidate clears the threshold and no chief complaint was supplied.
  util::Json start_session(const util::Json& request);
  // {question_id, answer}. ConflictError for a question that is not pending,
  // GoneError once the session is done.
  util::Json answer(const std::string& session_id, const util::Json& request);
  // PreconditionError until the session is done.
  util::Json get_assessment(const std::string& session_id);
  // {venue_of_care?, accepted_diagnoses?, toggle_diagnosis?}
  util::Json feedback(const std::string& session_id, const util::Json& request);
  util::Json health() const;

  SessionRecord snapshot(const std::string& session_id) const;
  SessionRecord replay(const std::vector<util::Json>& events) const;
  std::filesystem::path event_log_path(const std::string& session_id) const;
  static std::vector<util::Json> read_event_log(const std::filesystem::path& path);

  // Wire form of a question: rendered patient text and one ready-made answer
  // payload per option.
  util::Json question_json(const qseq::QuestionChoice& q) const;
  util::Json assessment_json(const SessionRecord& r) const;

  const ServiceConfig& config() const { return config_; }

 private:
  struct Entry {
    std::mutex mu;
    SessionRecord record;
  };

  std::shared_ptr<Entry> entry(const std::string& session_id) const;
  std::string new_session_id();
  qseq::Engine engine_for(const CohortKey& key) const;

  void apply_start(SessionRecord& r, const util::Json& event) const;
  void apply_answer(SessionRecord& r, const util::Json& event) const;
  void apply_feedback(SessionRecord& r, const util::Json& event) const;
  void apply(SessionRecord& r, const util::Json& event) const;
  void advance(SessionRecord& r) const;
  void append_event(const SessionRecord& r, const util::Json& event) const;
  util::Json progress_json(const SessionRecord& r) const;

  const ModelBundle& models_;
  const PatientStore& patients_;
  ServiceConfig config_;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 id_rng_;
};

}  // namespace triage::service

#include "triage/service/session_manager.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "triage/cms/render.hpp"
#include "triage/error.hpp"
#include "triage/util/log.hpp"

namespace triage::service {

namespace fs = std::filesystem;

namespace {

const char* kVenueNames[] = {"self_care", "phone_video", "in_person_primary_care",
                             "urgent_care", "emergency"};

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
void env_override(const char* name, T& field) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      field = v;
    } else if constexpr (std::is_same_v<T, int>) {
      field = std::stoi(v);
    } else {
      field = std::stod(v);
    }
  } catch (const std::exception&) {
    throw ConfigError(std::string("environment variable ") + name + " has an invalid value");
  }
}

util::Json scored_ccs_json(const std::vector<cc::ScoredCc>& v) {
  util::Json out = util::Json::array();
  for (const auto& s : v) out.push_back({{"chief_complaint", s.cc}, {"score", s.score}});
  return out;
}

util::Json choice_json(const qseq::QuestionChoice& q) {
  return {{"question_id", q.question},
          {"provenance", q.provenance},
          {"votes", q.votes},
          {"n_trees", q.n_trees},
          {"rules_applied", q.rules_applied}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and patients

util::Json ServiceConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"model_dir", model_dir},
          {"patients_path", patients_path},
          {"log_dir", log_dir},
          {"budget", budget},
          {"cc_threshold", cc_threshold},
          {"cc_top_k", cc_top_k}};
}

ServiceConfig ServiceConfig::from_json(const util::Json& j) {
  ServiceConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.model_dir = j.value("model_dir", c.model_dir);
    c.patients_path = j.value("patients_path", c.patients_path);
    c.log_dir = j.value("log_dir", c.log_dir);
    c.budget = j.value("budget", c.budget);
    c.cc_threshold = j.value("cc_threshold", c.cc_threshold);
    c.cc_top_k = j.value("cc_top_k", c.cc_top_k);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("service config: ") + e.what());
  }
  return c;
}

void ServiceConfig::apply_env() {
  env_override("TRIAGE_PORT", port);
  env_override("TRIAGE_MODEL_DIR", model_dir);
  env_override("TRIAGE_PATIENTS", patients_path);
  env_override("TRIAGE_LOG_DIR", log_dir);
  env_override("TRIAGE_BUDGET", budget);
  env_override("TRIAGE_CC_THRESHOLD", cc_threshold);
  env_override("TRIAGE_CC_TOP_K", cc_top_k);
}

ServiceConfig ServiceConfig::load(const std::optional<fs::path>& file) {
  ServiceConfig c = file ? from_json(util::read_json_file(*file)) : ServiceConfig{};
  c.apply_env();
  if (c.budget < 0) throw ConfigError("budget must be >= 0");
  if (c.cc_top_k < 1) throw ConfigError("cc_top_k must be >= 1");
  if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range");
  return c;
}

util::Json PatientSnapshot::to_json() const {
  return {{"patient_id", patient_id},
          {"age_years", age_years},
          {"sex", triage::to_string(sex)},
          {"history", history_to_json(history)}};
}

PatientSnapshot PatientSnapshot::from_json(const util::Json& j) {
  PatientSnapshot p;
  p.patient_id = util::get_field<std::string>(j, "patient_id", "patient");
  p.age_years = util::get_field<int>(j, "age_years", "patient");
  p.sex = parse_sex(util::get_field<std::string>(j, "sex", "patient"));
  p.history = history_from_json(util::get_field<util::Json>(j, "history", "patient"));
  return p;
}

void PatientStore::add(PatientSnapshot p) {
  const std::string id = p.patient_id;
  patients_.emplace(id, std::move(p));
}

void PatientStore::add_encounters(std::span<const Encounter> encounters) {
  for (const auto& e : encounters) add({e.patient_id, e.age_years, e.sex, e.history});
}

PatientStore PatientStore::load(const fs::path& path) {
  PatientStore s;
  util::for_each_jsonl(path, [&](const util::Json& row) {
    const Encounter e = encounter_from_json(row);
    s.add({e.patient_id, e.age_years, e.sex, e.history});
  });
  return s;
}

const PatientSnapshot* PatientStore::find(const std::string& id) const {
  auto it = patients_.find(id);
  return it == patients_.end() ? nullptr : &it->second;
}

std::string to_string(VenueOfCare v) { return kVenueNames[static_cast<int>(v)]; }

VenueOfCare parse_venue(const std::string& s) {
  for (int i = 0; i < 5; ++i) {
    if (s == kVenueNames[i]) return static_cast<VenueOfCare>(i);
  }
  throw ValidationError("unknown venue of care \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Provider document

util::Json provider_document(const cms::ConceptCatalog& catalog, const SessionRecord& r) {
  std::array<util::Json, 4> sections;
  for (auto& s : sections) s = util::Json::array();
  sections[0].push_back({{"chief_complaint", r.chosen_cc}, {"reason_text", r.reason_text}});

  std::set<std::string> done;
  auto emit = [&](const std::string& id, const char* source) {
    auto it = r.state.asserted.find(id);
    if (it == r.state.asserted.end() || !done.insert(id).second) return;
    const cms::Concept& c = catalog.at(id);
    util::Json entry = {{"concept_id", id},
                        {"question", c.canonical_name},
                        {"phrase", cms::clinical_phrase(c, it->second.value)},
                        {"sense", cms::to_string(cms::sense_of(it->second.value))},
                        {"source", source}};
    auto ft = r.state.free_text.find(id);
    if (ft != r.state.free_text.end()) entry["text"] = ft->second;
    sections[static_cast<int>(c.note_section)].push_back(std::move(entry));
  };
  for (const auto& q : r.state.asked) {
    emit(q, "answer");
    for (const auto& opt : catalog.at(q).options) emit(opt, "answer");
  }
  for (const auto& [id, a] : r.state.asserted) emit(id, "inferred");

  util::Json doc = util::Json::array();
  for (int s = 0; s < 4; ++s) {
    doc.push_back({{"section", cms::to_string(static_cast<cms::NoteSection>(s))},
                   {"entries", sections[s]}});
  }
  return {{"session_id", r.session_id}, {"sections", doc}};
}

// ---------------------------------------------------------------------------
// SessionManager

SessionManager::SessionManager(const ModelBundle& models, const PatientStore& patients,
                               ServiceConfig config)
    : models_(models), patients_(patients), config_(std::move(config)),
      id_rng_(std::random_device{}()) {
  if (!config_.log_dir.empty()) fs::create_directories(config_.log_dir);
}

std::string SessionManager::new_session_id() {
  std::lock_guard lock(mu_);
  for (;;) {
    std::ostringstream ss;
    ss << "s_" << std::hex << std::setw(16) << std::setfill('0') << id_rng_();
    if (!sessions_.count(ss.str())) return ss.str();
  }
}

std::shared_ptr<SessionManager::Entry> SessionManager::entry(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session " + id);
  return it->second;
}

qseq::Engine SessionManager::engine_for(const CohortKey& key) const {
  return {&models_.catalog, &models_.kb, models_.forest_for(key)};
}

fs::path SessionManager::event_log_path(const std::string& id) const {
  return fs::path(config_.log_dir) / (id + ".jsonl");
}

std::vector<util::Json> SessionManager::read_event_log(const fs::path& path) {
  return util::read_jsonl(path);
}

void SessionManager::append_event(const SessionRecord& r, const util::Json& event) const {
  if (config_.log_dir.empty()) return;
  std::ofstream out(event_log_path(r.session_id), std::ios::app);
  if (!out) throw Error("cannot append to event log for " + r.session_id);
  out << event.dump() << '\n';
}

void SessionManager::advance(SessionRecord& r) const {
  const qseq::Engine engine = engine_for(r.state.cohort);
  if (auto q = qseq::select_next_question(r.state, engine)) r.issued.push_back(*q);
  if (r.state.phase != qseq::Phase::kDone || r.assessment || !r.assessment_error.empty()) return;
  if (!models_.assessment) {
    r.assessment_error = "no assessment model is loaded";
    return;
  }
  Encounter e;
  e.patient_id = r.patient.patient_id;
  e.age_years = r.patient.age_years;
  e.age_bin = age_bin_of(r.patient.age_years);
  e.sex = r.patient.sex;
  e.history = r.patient.history;
  e.chief_complaints = {r.chosen_cc};
  for (const auto& [id, a] : r.state.asserted) e.assertions.push_back(a);
  try {
    const auto& model = *models_.assessment;
    r.assessment = neural::predict_assessment(model, neural::make_example(model.schema(), e,
                                                                           model.config()));
  } catch (const NotFoundError& err) {
    r.assessment_error = err.what();
  }
}

void SessionManager::apply_start(SessionRecord& r, const util::Json& ev) const {
  r.session_id = ev.at("session_id").get<std::string>();
  r.patient = PatientSnapshot::from_json(ev.at("patient"));
  r.reason_text = ev.at("reason_text").get<std::string>();
  const int budget = ev.at("budget").get<int>();
  const double threshold = ev.at("cc_threshold").get<double>();
  const int top_k = ev.at("cc_top_k").get<int>();
  r.predicted.clear();
  if (models_.cc_model) {
    r.predicted = cc::display_candidates(
        cc::predict_chief_complaints(*models_.cc_model, r.reason_text, r.patient.age_years,
                                     r.patient.sex, r.patient.history),
        top_k, threshold);
  }
  const util::Json& override_cc = ev.at("chief_complaint");
  if (!override_cc.is_null()) {
    r.chosen_cc = override_cc.get<std::string>();
    r.cc_overridden = std::none_of(r.predicted.begin(), r.predicted.end(),
                                   [&](const cc::ScoredCc& s) { return s.cc == r.chosen_cc; });
  } else {
    if (r.predicted.empty()) {
      throw PreconditionError("no chief complaint scored at least " + std::to_string(threshold) +
                              "; supply chief_complaint explicitly");
    }
    r.chosen_cc = r.predicted.front().cc;
    r.cc_overridden = false;
  }
  const CohortKey key{r.chosen_cc, age_bin_of(r.patient.age_years), r.patient.sex};
  r.rules_only = models_.forest_for(key) == nullptr;
  r.state = qseq::new_session(r.session_id, key, r.patient.age_years, r.patient.history, budget);
  r.issued.clear();
  r.assessment.reset();
  r.assessment_error.clear();
  advance(r);
}

void SessionManager::apply_answer(SessionRecord& r, const util::Json& ev) const {
  const std::string q = ev.at("question_id").get<std::string>();
  const qseq::Answer a = qseq::answer_from_json(ev.at("answer"));
  qseq::SessionState next = r.state;
  qseq::record_answer(next, q, a, engine_for(next.cohort));
  r.state = std::move(next);
  advance(r);
}

void SessionManager::apply_feedback(SessionRecord& r, const util::Json& ev) const {
  Feedback f = r.feedback;
  if (ev.contains("venue_of_care") && !ev.at("venue_of_care").is_null()) {
    f.venue_of_care = parse_venue(ev.at("venue_of_care").get<std::string>());
  }
  if (ev.contains("accepted_diagnoses")) {
    const auto v = ev.at("accepted_diagnoses").get<std::vector<std::string>>();
    f.accepted_diagnoses = {v.begin(), v.end()};
  }
  if (ev.contains("toggle_diagnosis")) {
    const auto code = ev.at("toggle_diagnosis").get<std::string>();
    if (!f.accepted_diagnoses.erase(code)) f.accepted_diagnoses.insert(code);
  }
  r.feedback = std::move(f);
}

void SessionManager::apply(SessionRecord& r, const util::Json& ev) const {
  const std::string type = ev.at("type").get<std::string>();
  if (type == "start") {
    apply_start(r, ev);
  } else if (type == "answer") {
    apply_answer(r, ev);
  } else if (type == "feedback") {
    apply_feedback(r, ev);
  } else {
    throw SchemaError("unknown session event type \"" + type + "\"");
  }
  r.events.push_back(ev);
}

util::Json SessionManager::question_json(const qseq::QuestionChoice& q) const {
  util::Json j = choice_json(q);
  const cms::Concept& c = models_.catalog.at(q.question);
  const auto rendered = cms::render_question(models_.catalog, q.question, cms::RenderMode::kPatient);
  const bool select = (c.response_type == cms::ResponseType::kSingleSelect ||
                       c.response_type == cms::ResponseType::kMultiSelect) &&
                      !c.options.empty();
  util::Json options = util::Json::array();
  for (const auto& opt : rendered.options) {
    const util::Json answer = select ? util::Json{{"selected", {opt.assertion.concept_id}}}
                                     : qseq::answer_to_json(qseq::Answer::of(opt.assertion.value));
    options.push_back({{"label", opt.label}, {"answer", answer}});
  }
  j["text"] = rendered.text;
  j["response_type"] = cms::to_string(c.response_type);
  j["options"] = options;
  return j;
}

util::Json SessionManager::progress_json(const SessionRecord& r) const {
  util::Json j = {{"session_id", r.session_id},
                  {"phase", qseq::to_string(r.state.phase)},
                  {"remaining_budget", r.state.remaining_budget},
                  {"assessment_ready", r.state.phase == qseq::Phase::kDone}};
  j["question"] = r.state.pending ? question_json(*r.state.pending) : util::Json();
  return j;
}

util::Json SessionManager::assessment_json(const SessionRecord& r) const {
  static const char* kHeads[neural::kNumHeads] = {"diagnoses", "medications", "labs", "imaging"};
  util::Json lists = util::Json::object();
  for (int h = 0; h < neural::kNumHeads; ++h) {
    util::Json rows = util::Json::array();
    for (const auto& s : (*r.assessment)[h]) rows.push_back({{"code", s.code}, {"score", s.score}});
    lists[kHeads[h]] = rows;
  }
  return lists;
}

util::Json SessionManager::start_session(const util::Json& request) {
  if (!request.is_object()) throw ValidationError("request body must be a JSON object");
  const std::string patient_id = request.value("patient_id", std::string());
  const std::string text = trimmed(request.value("reason_text", std::string()));
  if (patient_id.empty()) throw ValidationError("patient_id is required");
  if (text.empty()) throw ValidationError("reason_text must not be empty");
  const PatientSnapshot* p = patients_.find(patient_id);
  if (p == nullptr) throw NotFoundError("unknown patient " + patient_id);
  util::Json override_cc;
  if (request.contains("chief_complaint") && !request.at("chief_complaint").is_null()) {
    const std::string cc = request.at("chief_complaint").get<std::string>();
    if (models_.cc_model) {
      const auto& known = models_.cc_model->classifier.chief_complaints();
      if (std::find(known.begin(), known.end(), cc) == known.end()) {
        throw ValidationError("unknown chief complaint \"" + cc + "\"");
      }
    }
    override_cc = cc;
  }
  auto e = std::make_shared<Entry>();
  const util::Json event = {{"type", "start"},
                            {"session_id", new_session_id()},
                            {"patient", p->to_json()},
                            {"reason_text", text},
                            {"chief_complaint", override_cc},
                            {"budget", config_.budget},
                            {"cc_threshold", config_.cc_threshold},
                            {"cc_top_k", config_.cc_top_k}};
  apply(e->record, event);
  append_event(e->record, event);
  {
    std::lock_guard lock(mu_);
    sessions_.emplace(e->record.session_id, e);
  }
  const SessionRecord& r = e->record;
  util::Json out = progress_json(r);
  out["cc_candidates"] = scored_ccs_json(r.predicted);
  out["chief_complaint"] = r.chosen_cc;
  out["cc_overridden"] = r.cc_overridden;
  out["rules_only"] = r.rules_only;
  return out;
}

util::Json SessionManager::answer(const std::string& id, const util::Json& request) {
  if (!request.is_object() || !request.contains("question_id") || !request.contains("answer")) {
    throw ValidationError("answer requests need question_id and answer");
  }
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  const util::Json event = {{"type", "answer"},
                            {"question_id", request.at("question_id")},
                            {"answer", request.at("answer")}};
  if (!event.at("question_id").is_string()) throw ValidationError("question_id must be a string");
  SessionRecord next = e->record;
  apply(next, event);
  append_event(next, event);
  e->record = std::move(next);
  return progress_json(e->record);
}

util::Json SessionManager::get_assessment(const std::string& id) {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  const SessionRecord& r = e->record;
  if (r.state.phase != qseq::Phase::kDone) {
    throw PreconditionError("session " + id + " is still asking questions");
  }
  if (!r.assessment) throw NotFoundError("no assessment for session " + id + ": " + r.assessment_error);
  return {{"session_id", id},
          {"chief_complaint", r.chosen_cc},
          {"assessment", assessment_json(r)},
          {"document", provider_document(models_.catalog, r)}};
}

util::Json SessionManager::feedback(const std::string& id, const util::Json& request) {
  if (!request.is_object()) throw ValidationError("request body must be a JSON object");
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  util::Json event = {{"type", "feedback"}};
  try {
    if (request.contains("venue_of_care")) {
      event["venue_of_care"] = to_string(parse_venue(request.at("venue_of_care").get<std::string>()));
    }
    if (request.contains("accepted_diagnoses")) {
      event["accepted_diagnoses"] = request.at("accepted_diagnoses").get<std::vector<std::string>>();
    }
    if (request.contains("toggle_diagnosis")) {
      event["toggle_diagnosis"] = request.at("toggle_diagnosis").get<std::string>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed feedback: ") + ex.what());
  }
  SessionRecord next = e->record;
  apply(next, event);
  append_event(next, event);
  e->record = std::move(next);
  const Feedback& f = e->record.feedback;
  util::Json out = {{"session_id", id},
                    {"accepted_diagnoses", std::vector<std::string>(f.accepted_diagnoses.begin(),
                                                                    f.accepted_diagnoses.end())}};
  out["venue_of_care"] = f.venue_of_care ? util::Json(to_string(*f.venue_of_care)) : util::Json();
  return out;
}

util::Json SessionManager::health() const {
  std::lock_guard lock(mu_);
  return {{"status", "ok"},
          {"forests", models_.forests.size()},
          {"rules_only_cohorts", models_.rules_only.size()},
          {"cc_model", models_.cc_model.has_value()},
          {"assessment_model", models_.assessment.has_value()},
          {"sessions", sessions_.size()}};
}

SessionRecord SessionManager::snapshot(const std::string& id) const {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  return e->record;
}

SessionRecord SessionManager::replay(const std::vector<util::Json>& events) const {
  if (events.empty() || events.front().value("type", "") != "start") {
    throw SchemaError("an event log must begin with a start event");
  }
  SessionRecord r;
  for (const auto& ev : events) apply(r, ev);
  return r;
}

}  // namespace triage::service

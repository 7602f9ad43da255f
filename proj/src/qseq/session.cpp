#include "triage/qseq/session.hpp"

#include <algorithm>
#include <set>

#include "triage/error.hpp"

namespace triage::qseq {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kHpiScripted: return "hpi_scripted";
    case Phase::kMlQuestions: return "ml_questions";
    case Phase::kDone: return "done";
  }
  return "";
}

Phase parse_phase(const std::string& s) {
  if (s == "hpi_scripted") return Phase::kHpiScripted;
  if (s == "ml_questions") return Phase::kMlQuestions;
  if (s == "done") return Phase::kDone;
  throw SchemaError("unknown phase \"" + s + "\"");
}

util::Json answer_to_json(const Answer& a) {
  util::Json j = util::Json::object();
  if (a.value) {
    if (const auto* c = std::get_if<cms::Certainty>(&*a.value)) {
      j["value"] = cms::to_string(*c);
    } else if (const auto* d = std::get_if<cms::DurationDays>(&*a.value)) {
      j["duration_days"] = d->days;
    } else if (const auto* s = std::get_if<cms::SeverityLevel>(&*a.value)) {
      j["severity"] = s->level;
    }
  }
  if (!a.selected.empty()) j["selected"] = a.selected;
  if (a.text) j["text"] = *a.text;
  return j;
}

Answer answer_from_json(const util::Json& j) {
  if (!j.is_object()) throw ValidationError("answer must be an object");
  Answer a;
  try {
    if (j.contains("value")) a.value = cms::parse_certainty(j.at("value").get<std::string>());
    if (j.contains("duration_days")) {
      a.value = cms::DurationDays{j.at("duration_days").get<int>()};
    }
    if (j.contains("severity")) a.value = cms::SeverityLevel{j.at("severity").get<int>()};
    if (j.contains("selected")) a.selected = j.at("selected").get<std::vector<std::string>>();
    if (j.contains("text")) a.text = j.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed answer: ") + e.what());
  } catch (const SchemaError& e) {
    throw ValidationError(e.what());
  }
  return a;
}

std::vector<cms::Assertion> answer_to_assertions(const cms::ConceptCatalog& catalog,
                                                 const std::string& question,
                                                 const Answer& answer) {
  const cms::Concept* c = catalog.find(question);
  if (c == nullptr) throw ValidationError("unknown question \"" + question + "\"");
  std::vector<cms::Assertion> out;
  const bool is_select = c->response_type == cms::ResponseType::kSingleSelect ||
                         c->response_type == cms::ResponseType::kMultiSelect;
  if (is_select && !c->options.empty()) {
    std::set<std::string> chosen(answer.selected.begin(), answer.selected.end());
    if (chosen.size() != answer.selected.size()) {
      throw ValidationError("duplicate selections for \"" + question + "\"");
    }
    for (const auto& s : chosen) {
      if (std::find(c->options.begin(), c->options.end(), s) == c->options.end()) {
        throw ValidationError("\"" + s + "\" is not an option of \"" + question + "\"");
      }
    }
    if (c->response_type == cms::ResponseType::kSingleSelect && chosen.size() != 1) {
      throw ValidationError("single-select \"" + question + "\" needs one selection");
    }
    for (const auto& opt : c->options) {
      out.push_back({opt, chosen.count(opt) ? cms::Certainty::kCertain
                                            : cms::Certainty::kAbsent});
    }
    out.push_back({question, chosen.empty() ? cms::Certainty::kAbsent
                                            : cms::Certainty::kCertain});
    return out;
  }
  if (c->response_type == cms::ResponseType::kFreeText) {
    if (!answer.text) throw ValidationError("free-text \"" + question + "\" needs text");
    out.push_back({question, cms::Certainty::kCertain});
    return out;
  }
  if (!answer.value) throw ValidationError("answer for \"" + question + "\" has no value");
  cms::Assertion a{question, *answer.value};
  catalog.validate_assertion(a);
  out.push_back(std::move(a));
  return out;
}

bool SessionState::was_asked(const std::string& q) const {
  return std::find(asked.begin(), asked.end(), q) != asked.end();
}

util::Json SessionState::to_json() const {
  util::Json asserted_json = util::Json::array();
  for (const auto& [id, a] : asserted) {
    util::Json j = cms::assertion_to_json(a);
    auto it = inferred.find(id);
    if (it != inferred.end()) j["inferred_by"] = it->second;
    asserted_json.push_back(std::move(j));
  }
  util::Json j = {{"session_id", session_id},
                  {"cohort",
                   {{"chief_complaint", cohort.chief_complaint},
                    {"age_bin", cohort.age_bin},
                    {"sex", triage::to_string(cohort.sex)}}},
                  {"phase", to_string(phase)},
                  {"remaining_budget", remaining_budget},
                  {"asked", asked},
                  {"asserted", asserted_json}};
  if (pending) j["pending"] = pending->question;
  return j;
}

SessionState new_session(std::string session_id, CohortKey cohort, int age_years,
                         History history, int budget) {
  if (budget < 0) throw ConfigError("question budget must be >= 0");
  SessionState s;
  s.session_id = std::move(session_id);
  s.cohort = std::move(cohort);
  s.age_years = age_years;
  s.history = std::move(history);
  s.remaining_budget = budget;
  return s;
}

namespace {

void run_inference(SessionState& state, const Engine& engine) {
  auto result = infer_assertions(state.asserted, state.inferred,
                                 engine.kb->inference_rules);
  state.asserted = std::move(result.asserted);
  state.inferred = std::move(result.provenance);
}

std::vector<cms::Assertion> assertion_list(const AssertedMap& m) {
  std::vector<cms::Assertion> v;
  v.reserve(m.size());
  for (const auto& [id, a] : m) v.push_back(a);
  return v;
}

}  // namespace

Votes rank_candidates(const SessionState& state, const Engine& engine,
                      RuleTrace* trace) {
  if (engine.forest == nullptr) return {};
  const auto assertions = assertion_list(state.asserted);
  const auto row = engine.forest->encode(state.age_years, assertions, state.history);
  Votes votes = forest_vote(*engine.forest, row, *engine.catalog);
  votes = apply_prerequisites(votes, engine.kb->prerequisites, state.asserted, trace);
  votes = apply_fixers(votes, engine.kb->fixers, state.cohort, state.asserted, trace);
  for (auto it = votes.begin(); it != votes.end();) {
    if (state.asserted.count(it->first) || state.was_asked(it->first)) {
      it = votes.erase(it);
    } else {
      ++it;
    }
  }
  return votes;
}

std::optional<QuestionChoice> select_next_question(SessionState& state,
                                                   const Engine& engine) {
  if (state.phase == Phase::kDone) return std::nullopt;
  if (state.pending) return state.pending;
  run_inference(state, engine);

  if (state.phase == Phase::kHpiScripted) {
    const auto& script = engine.kb->script_for(state.cohort.chief_complaint);
    while (state.script_cursor < script.size()) {
      const ScriptedStep& step = script[state.script_cursor++];
      const std::string& q = engine.catalog->question_for(step.concept_id);
      if (state.asserted.count(q) || state.was_asked(q)) continue;
      if (!step.when.holds(state.cohort, state.asserted)) continue;
      QuestionChoice choice;
      choice.question = q;
      choice.provenance = "hpi";
      state.pending = choice;
      return choice;
    }
    state.phase = Phase::kMlQuestions;
  }

  if (engine.forest == nullptr || state.remaining_budget <= 0) {
    state.phase = Phase::kDone;
    return std::nullopt;
  }
  RuleTrace trace;
  const Votes votes = rank_candidates(state, engine, &trace);
  const std::pair<const std::string, int>* best = nullptr;
  for (const auto& kv : votes) {
    if (best == nullptr || kv.second > best->second) best = &kv;
  }
  if (best == nullptr || best->second <= 0) {
    state.phase = Phase::kDone;
    return std::nullopt;
  }
  QuestionChoice choice;
  choice.question = best->first;
  choice.provenance = "ml";
  choice.votes = best->second;
  choice.n_trees = static_cast<int>(engine.forest->trees.size());
  choice.rules_applied = std::move(trace);
  state.pending = choice;
  return choice;
}

void record_answer(SessionState& state, const std::string& question,
                   const Answer& answer, const Engine& engine) {
  if (state.phase == Phase::kDone) {
    throw GoneError("session " + state.session_id + " is complete");
  }
  if (!state.pending || state.pending->question != question) {
    throw ConflictError("question \"" + question + "\" is not the pending question");
  }
  const auto assertions = answer_to_assertions(*engine.catalog, question, answer);
  for (const auto& a : assertions) {
    state.asserted[a.concept_id] = a;
    state.inferred.erase(a.concept_id);
  }
  if (answer.text) state.free_text[question] = *answer.text;
  state.asked.push_back(question);
  const bool ml = state.pending->provenance == "ml";
  state.pending.reset();
  if (ml) {
    --state.remaining_budget;
    if (state.remaining_budget <= 0) state.phase = Phase::kDone;
  }
}

}  // namespace triage::qseq

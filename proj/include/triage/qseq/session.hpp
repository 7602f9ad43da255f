#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "triage/cms/catalog.hpp"
#include "triage/forest/forest.hpp"
#include "triage/qseq/kb.hpp"
#include "triage/qseq/rules.hpp"

namespace triage::qseq {

enum class Phase { kHpiScripted, kMlQuestions, kDone };
std::string to_string(Phase p);
Phase parse_phase(const std::string& s);

inline constexpr int kDefaultBudget = 15;

// Why a question was chosen.
struct QuestionChoice {
  std::string question;
  std::string provenance;  // "hpi" or "ml"
  int votes = 0;           // trees voting for it (ml only)
  int n_trees = 0;
  RuleTrace rules_applied;
};

// A patient's reply. Exactly one of the fields is used, chosen by the
// question's response type.
struct Answer {
  std::optional<cms::AssertionValue> value;  // yes/no, duration, severity
  std::vector<std::string> selected;         // select questions
  std::optional<std::string> text;           // free text

  static Answer of(cms::AssertionValue v) { return Answer{v, {}, std::nullopt}; }
};

util::Json answer_to_json(const Answer& a);
Answer answer_from_json(const util::Json& j);

// Assertions produced by answering `question`. Single-select records the
// chosen option certain and the others absent; multi-select does the same
// per option; the question concept itself is certain when anything was
// selected. Free text records the question certain. Throws ValidationError.
std::vector<cms::Assertion> answer_to_assertions(const cms::ConceptCatalog& catalog,
                                                 const std::string& question,
                                                 const Answer& answer);

struct SessionState {
  std::string session_id;
  CohortKey cohort;
  int age_years = 0;
  History history;
  AssertedMap asserted;
  // Concept id -> inference rule id, for concepts asserted by rules.
  std::map<std::string, std::string> inferred;
  std::vector<std::string> asked;
  std::map<std::string, std::string> free_text;
  std::optional<QuestionChoice> pending;
  int remaining_budget = kDefaultBudget;  // ML questions still allowed
  std::size_t script_cursor = 0;
  Phase phase = Phase::kHpiScripted;

  bool was_asked(const std::string& q) const;
  util::Json to_json() const;
};

SessionState new_session(std::string session_id, CohortKey cohort, int age_years,
                         History history, int budget = kDefaultBudget);

// Shared, immutable engine inputs. `forest` is null for rules-only cohorts.
struct Engine {
  const cms::ConceptCatalog* catalog = nullptr;
  const KnowledgeBase* kb = nullptr;
  const forest::CohortForest* forest = nullptr;
};

// The ML-phase ranking for the current state: infer, vote, prerequisites,
// fixers. Questions already asked or asserted are removed.
Votes rank_candidates(const SessionState& state, const Engine& engine,
                      RuleTrace* trace = nullptr);

// Picks the next question and stores it as pending, or moves the session to
// done. Ties on weight go to the smaller question id. Returns nullopt when
// the session is done.
std::optional<QuestionChoice> select_next_question(SessionState& state,
                                                   const Engine& engine);

// Records the answer to the pending question. Throws GoneError when the
// session is done, ConflictError when `question` is not pending and
// ValidationError for malformed answers.
void record_answer(SessionState& state, const std::string& question,
                   const Answer& answer, const Engine& engine);

}  // namespace triage::qseq

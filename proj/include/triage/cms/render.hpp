#pragma once

#include <optional>
#include <string>
#include <vector>

#include "triage/cms/catalog.hpp"

namespace triage::cms {

enum class RenderMode { kPatient, kProvider };

// Clinical sense of a recorded answer as it appears in the note.
enum class Sense { kPositive, kNegative, kUncertain };

struct AnswerOption {
  std::string label;
  Assertion assertion;
};

struct RenderedQuestion {
  std::string concept_id;
  std::string text;
  std::vector<AnswerOption> options;
  // Set only for provider rendering of a recorded answer.
  std::optional<Sense> sense;
};

// Representative values offered by the duration dropdown, in days.
const std::vector<std::pair<std::string, int>>& duration_choices();

// Patient mode: stem + patient text + post text with the answer options for
// the response type. Provider mode without an answer: canonical name with one
// clinical phrase per option. Provider mode with an answer: the clinical
// phrase for that answer. Throws NotFoundError for unknown concepts.
RenderedQuestion render_question(const ConceptCatalog& catalog,
                                 const std::string& concept_id,
                                 RenderMode mode,
                                 const AssertionValue* answer = nullptr);

// "Patient reports X." / "Patient denies X." etc.
std::string clinical_phrase(const Concept& c, const AssertionValue& v);
Sense sense_of(const AssertionValue& v);
std::string to_string(Sense s);

}  // namespace triage::cms

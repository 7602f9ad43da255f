#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "triage/util/json_io.hpp"

namespace triage::cms {

enum class ResponseType {
  kYesNo,
  kSingleSelect,
  kMultiSelect,
  kDurationDropdown,
  kSeverityScale,
  kFreeText,
};

enum class NoteSection { kCC, kHPI, kROS, kPE };

enum class ResponseEvaluation {
  kCategorical,
  kOrdinalDuration,
  kOrdinalSeverity,
};

enum class Certainty { kCertain, kAbsent, kUnsure };

struct DurationDays {
  int days = 0;
  friend bool operator==(const DurationDays&, const DurationDays&) = default;
};

struct SeverityLevel {
  int level = 0;
  friend bool operator==(const SeverityLevel&, const SeverityLevel&) = default;
};

using AssertionValue = std::variant<Certainty, DurationDays, SeverityLevel>;

struct Assertion {
  std::string concept_id;
  AssertionValue value;
  friend bool operator==(const Assertion&, const Assertion&) = default;
};

inline constexpr int kMaxSeverity = 10;

// True for "certain" and for any ordinal value (the finding is present).
bool is_present(const AssertionValue& v);
bool is_absent(const AssertionValue& v);
// "unsure" carries no information for downstream models.
bool is_informative(const AssertionValue& v);

struct Concept {
  std::string id;
  std::string canonical_name;
  std::vector<std::string> synonyms;
  std::string patient_text;
  ResponseType response_type = ResponseType::kYesNo;
  std::optional<std::string> stem;
  std::optional<std::string> post_text;
  NoteSection note_section = NoteSection::kHPI;
  ResponseEvaluation response_evaluation = ResponseEvaluation::kCategorical;
  // Option concepts offered by single/multi-select questions. Empty means the
  // select question falls back to yes/no/not-sure answers.
  std::vector<std::string> options;
};

// Immutable after construction; safe to share across sessions.
class ConceptCatalog {
 public:
  ConceptCatalog() = default;

  // Validates every invariant; throws ValidationError / SchemaError.
  static ConceptCatalog from_json(const util::Json& doc,
                                  const std::string& origin = "catalog");
  static ConceptCatalog from_concepts(std::string version,
                                      std::vector<Concept> concepts);
  static ConceptCatalog load(const std::filesystem::path& path);

  util::Json to_json() const;
  void save(const std::filesystem::path& path) const;

  const std::string& version() const { return version_; }
  std::size_t size() const { return concepts_.size(); }
  // Sorted by concept id.
  const std::vector<Concept>& concepts() const { return concepts_; }

  const Concept* find(std::string_view id) const;
  // Throws NotFoundError.
  const Concept& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  std::optional<std::string> resolve_synonym(std::string_view raw_id) const;

  // The question that collects `concept_id`: the owning select question when
  // the concept is one of its options, otherwise the concept itself.
  const std::string& question_for(const std::string& concept_id) const;

  // Checks that `value` is legal for the concept's response evaluation.
  void validate_assertion(const Assertion& a) const;

 private:
  void build_indexes();

  std::string version_;
  std::vector<Concept> concepts_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::string> synonym_owner_;
  std::unordered_map<std::string, std::string> option_parent_;
};

std::string to_string(ResponseType t);
std::string to_string(NoteSection s);
std::string to_string(ResponseEvaluation e);
std::string to_string(Certainty c);
ResponseType parse_response_type(const std::string& s);
NoteSection parse_note_section(const std::string& s);
ResponseEvaluation parse_response_evaluation(const std::string& s);
Certainty parse_certainty(const std::string& s);

// Wire form: {"concept": id, "value": "certain"} or {"concept": id,
// "duration_days": n} or {"concept": id, "severity": n}.
util::Json assertion_to_json(const Assertion& a);
Assertion assertion_from_json(const util::Json& j);
std::string describe(const AssertionValue& v);

}  // namespace triage::cms

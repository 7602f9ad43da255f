#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "triage/cms/catalog.hpp"
#include "triage/datagen/encounter.hpp"
#include "triage/util/json_io.hpp"

namespace triage::qseq {

using AssertedMap = std::map<std::string, cms::Assertion>;

// Condition on one concept's recorded value. "present" matches certain and
// any ordinal value; "answered" matches any value.
struct Literal {
  enum class Kind { kCertain, kAbsent, kUnsure, kPresent, kAnswered };
  std::string concept_id;
  Kind kind = Kind::kCertain;

  bool holds(const AssertedMap& asserted) const;
};

// Conjunction of every field that is set.
struct Predicate {
  std::optional<Sex> sex;
  std::optional<int> age_bin_min;
  std::optional<int> age_bin_max;
  std::vector<std::string> chief_complaints;
  std::vector<Literal> asserted;

  bool holds(const CohortKey& cohort, const AssertedMap& state) const;
  bool empty() const;
};

struct PrerequisiteRule {
  std::string target;
  std::string prerequisite;
  bool ask_prereq_first = false;
};

struct FixerRule {
  std::string id;
  Predicate when;
  std::vector<std::string> blocked;
};

struct InferenceRule {
  std::string id;
  std::vector<Literal> antecedents;
  std::vector<cms::Assertion> consequents;
};

struct ScriptedStep {
  std::string concept_id;
  Predicate when;
};

// Immutable after load; shared by all sessions.
class KnowledgeBase {
 public:
  // Every concept reference must resolve in the catalog, prerequisites must
  // be acyclic with at most one rule per target, and rule ids must be unique.
  // Throws ValidationError / SchemaError.
  static KnowledgeBase from_json(const util::Json& doc,
                                 const cms::ConceptCatalog& catalog);
  static KnowledgeBase load(const std::filesystem::path& path,
                            const cms::ConceptCatalog& catalog);
  util::Json to_json() const;

  std::vector<PrerequisiteRule> prerequisites;
  std::vector<FixerRule> fixers;
  std::vector<InferenceRule> inference_rules;
  std::map<std::string, std::vector<ScriptedStep>> scripted_hpi;

  const PrerequisiteRule* prerequisite_for(const std::string& target) const;
  const std::vector<ScriptedStep>& script_for(const std::string& cc) const;

  // Re-checks the invariants listed on from_json.
  void validate(const cms::ConceptCatalog& catalog) const;
};

Literal literal_from_json(const util::Json& j);
util::Json literal_to_json(const Literal& l);
Predicate predicate_from_json(const util::Json& j);
util::Json predicate_to_json(const Predicate& p);

}  // namespace triage::qseq

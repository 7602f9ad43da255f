#pragma once

#include <map>
#include <string>
#include <vector>

#include "triage/qseq/kb.hpp"
#include "triage/qseq/vote.hpp"

namespace triage::qseq {

struct InferenceResult {
  AssertedMap asserted;
  // Concept id -> id of the rule that asserted it.
  std::map<std::string, std::string> provenance;
};

// Forward-chains to a fixpoint. Each rule fires at most once, so the fixpoint
// is reached within |rules| + 1 passes. A consequent never overrides a value
// that was already recorded; two rules asserting different values for the
// same concept raise ConflictError naming both. Idempotent.
InferenceResult infer_assertions(const AssertedMap& asserted,
                                 const std::map<std::string, std::string>& provenance,
                                 const std::vector<InferenceRule>& rules);

// Human-readable trace entries ("prerequisite:<target>-><prereq>", ...).
using RuleTrace = std::vector<std::string>;

// Per candidate with a prerequisite rule:
//   prerequisite absent   -> candidate weight 0
//   prerequisite answered -> unchanged
//   unanswered, ask_prereq_first -> the prerequisite replaces the candidate
//     and receives the summed weights of every candidate it replaces
//   unanswered otherwise  -> unchanged
// Replacement repeats while a replacing prerequisite is itself gated.
Votes apply_prerequisites(const Votes& votes,
                          const std::vector<PrerequisiteRule>& rules,
                          const AssertedMap& asserted, RuleTrace* trace = nullptr);

// Removes every candidate blocked by a fixer whose predicate holds.
Votes apply_fixers(const Votes& votes, const std::vector<FixerRule>& fixers,
                   const CohortKey& cohort, const AssertedMap& asserted,
                   RuleTrace* trace = nullptr);

}  // namespace triage::qseq

#include "triage/qseq/rules.hpp"

#include <set>

#include "triage/error.hpp"

namespace triage::qseq {

InferenceResult infer_assertions(
    const AssertedMap& asserted,
    const std::map<std::string, std::string>& provenance,
    const std::vector<InferenceRule>& rules) {
  InferenceResult out{asserted, provenance};
  std::vector<char> fired(rules.size(), 0);
  for (std::size_t pass = 0; pass <= rules.size(); ++pass) {
    bool changed = false;
    for (std::size_t r = 0; r < rules.size(); ++r) {
      if (fired[r]) continue;
      const InferenceRule& rule = rules[r];
      bool holds = true;
      for (const Literal& l : rule.antecedents) {
        if (!l.holds(out.asserted)) {
          holds = false;
          break;
        }
      }
      if (!holds) continue;
      fired[r] = 1;
      for (const cms::Assertion& a : rule.consequents) {
        auto it = out.asserted.find(a.concept_id);
        if (it == out.asserted.end()) {
          out.asserted.emplace(a.concept_id, a);
          out.provenance[a.concept_id] = rule.id;
          changed = true;
          continue;
        }
        if (it->second.value == a.value) continue;
        auto prov = out.provenance.find(a.concept_id);
        if (prov != out.provenance.end()) {
          throw ConflictError("inference rules \"" + prov->second + "\" and \"" +
                              rule.id + "\" assert different values for \"" +
                              a.concept_id + "\"");
        }
      }
    }
    if (!changed) return out;
  }
  throw ValidationError("inference rules did not reach a fixpoint");
}

Votes apply_prerequisites(const Votes& votes,
                          const std::vector<PrerequisiteRule>& rules,
                          const AssertedMap& asserted, RuleTrace* trace) {
  std::map<std::string, const PrerequisiteRule*> by_target;
  for (const auto& r : rules) by_target.emplace(r.target, &r);

  Votes current = votes;
  // Each round resolves one level of the (acyclic) prerequisite chains.
  for (std::size_t round = 0; round <= rules.size(); ++round) {
    Votes next;
    bool replaced = false;
    for (const auto& [q, w] : current) {
      auto it = by_target.find(q);
      if (it == by_target.end()) {
        next[q] += w;
        continue;
      }
      const PrerequisiteRule& rule = *it->second;
      auto ans = asserted.find(rule.prerequisite);
      if (ans != asserted.end()) {
        if (cms::is_absent(ans->second.value)) {
          next[q] += 0;
          if (trace) trace->push_back("prerequisite:" + rule.prerequisite + " absent, " + q + " weight 0");
        } else {
          next[q] += w;
        }
      } else if (rule.ask_prereq_first) {
        next[rule.prerequisite] += w;
        replaced = true;
        if (trace) trace->push_back("prerequisite:" + q + "->" + rule.prerequisite);
      } else {
        next[q] += w;
      }
    }
    current = std::move(next);
    if (!replaced) return current;
  }
  return current;
}

Votes apply_fixers(const Votes& votes, const std::vector<FixerRule>& fixers,
                   const CohortKey& cohort, const AssertedMap& asserted,
                   RuleTrace* trace) {
  std::set<std::string> blocked;
  for (const FixerRule& f : fixers) {
    if (!f.when.holds(cohort, asserted)) continue;
    for (const auto& b : f.blocked) {
      if (votes.count(b) && blocked.insert(b).second && trace) {
        trace->push_back("fixer:" + f.id + " blocked " + b);
      }
    }
  }
  Votes out;
  for (const auto& [q, w] : votes) {
    if (!blocked.count(q)) out.emplace(q, w);
  }
  return out;
}

}  // namespace triage::qseq

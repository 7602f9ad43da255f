#include "triage/stats/lift.hpp"

#include <algorithm>
#include <unordered_map>

#include "triage/error.hpp"

namespace triage::stats {

namespace {

std::vector<std::string> unique_sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

const LiftEntry* LiftTable::find(const std::string& target,
                                 const std::string& cc) const {
  auto it = entries.find({target, cc});
  return it == entries.end() ? nullptr : &it->second;
}

LiftTable bayesian_lift(std::span<const LiftRow> rows) {
  LiftTable table;
  table.n_rows = static_cast<std::int64_t>(rows.size());
  std::map<std::string, std::int64_t> cc_count;
  std::map<std::string, std::int64_t> target_count;
  std::map<std::pair<std::string, std::string>, std::int64_t> joint;
  for (const LiftRow& row : rows) {
    const auto ccs = unique_sorted(row.chief_complaints);
    const auto targets = unique_sorted(row.targets);
    for (const auto& c : ccs) ++cc_count[c];
    for (const auto& t : targets) {
      ++target_count[t];
      for (const auto& c : ccs) ++joint[{t, c}];
    }
  }
  const double n = static_cast<double>(table.n_rows);
  for (const auto& [t, nt] : target_count) {
    for (const auto& [c, nc] : cc_count) {
      LiftEntry e;
      e.cc_count = nc;
      e.target_count = nt;
      auto it = joint.find({t, c});
      e.joint = it == joint.end() ? 0 : it->second;
      e.lift = (static_cast<double>(e.joint) / static_cast<double>(nc)) /
               (static_cast<double>(nt) / n);
      table.entries.emplace(std::make_pair(t, c), e);
    }
  }
  return table;
}

LiftTable bayesian_lift(std::span<const Encounter> dataset, OutcomeKind kind) {
  std::vector<LiftRow> rows;
  rows.reserve(dataset.size());
  for (const Encounter& e : dataset) {
    rows.push_back({e.chief_complaints, e.outcomes.of(kind)});
  }
  return bayesian_lift(rows);
}

TargetSet filter_targets(const LiftTable& lift, double threshold,
                         std::int64_t min_count) {
  if (!(threshold > 0.0)) throw ValidationError("lift threshold must be > 0");
  TargetSet kept;
  const double n = static_cast<double>(lift.n_rows);
  for (const auto& [key, e] : lift.entries) {
    // lift > thr  <=>  joint * N > thr * count(c) * count(t); the integer
    // products are exact, so a lift of exactly thr is never kept.
    const double lhs = static_cast<double>(e.joint) * n;
    const double rhs = threshold * static_cast<double>(e.cc_count) *
                       static_cast<double>(e.target_count);
    if (lhs > rhs && e.joint >= min_count) kept.insert(key);
  }
  return kept;
}

}  // namespace triage::stats

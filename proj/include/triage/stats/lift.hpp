#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "triage/datagen/encounter.hpp"

namespace triage::stats {

// One dataset row reduced to what lift needs. Duplicates within a row are
// counted once.
struct LiftRow {
  std::vector<std::string> chief_complaints;
  std::vector<std::string> targets;
};

struct LiftEntry {
  double lift = 0.0;
  std::int64_t joint = 0;         // count(t and c)
  std::int64_t cc_count = 0;      // count(c)
  std::int64_t target_count = 0;  // count(t)
};

// (target, chief complaint) -> lift[t|c] = P[t|c] / P[t].
struct LiftTable {
  std::int64_t n_rows = 0;
  std::map<std::pair<std::string, std::string>, LiftEntry> entries;

  const LiftEntry* find(const std::string& target, const std::string& cc) const;
};

// Exact integer counting. Pairs with count(c) = 0 or count(t) = 0 are
// omitted; pairs that never co-occur have lift 0.
LiftTable bayesian_lift(std::span<const LiftRow> rows);
LiftTable bayesian_lift(std::span<const Encounter> dataset, OutcomeKind kind);

using TargetSet = std::set<std::pair<std::string, std::string>>;

// Keeps (t, c) iff lift > threshold and count(t and c) >= min_count.
TargetSet filter_targets(const LiftTable& lift, double threshold,
                         std::int64_t min_count);

inline constexpr double kLiftThreshold = 2.0;

}  // namespace triage::stats

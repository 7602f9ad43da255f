#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triage/cms/catalog.hpp"
#include "triage/datagen/encounter.hpp"
#include "triage/stats/lift.hpp"
#include "triage/util/json_io.hpp"

namespace triage::forest {

// Feature layout: [concepts...][age_years][history indicators...].
// Categorical concepts encode certain = +1, absent = -1, unasserted or
// unsure = 0. Ordinal concepts encode their value, or -1 when unasserted.
// Age and history are always known.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<std::string> concepts, std::vector<char> ordinal,
                std::vector<std::string> history_items);

  std::size_t size() const { return concepts_.size() + 1 + history_.size(); }
  std::size_t n_concepts() const { return concepts_.size(); }
  const std::vector<std::string>& concepts() const { return concepts_; }
  const std::vector<char>& ordinal() const { return ordinal_; }
  // "<channel>:<item>" keys.
  const std::vector<std::string>& history_items() const { return history_; }
  std::size_t age_index() const { return concepts_.size(); }

  bool is_concept(std::size_t f) const { return f < concepts_.size(); }
  std::optional<std::size_t> concept_index(const std::string& id) const;
  std::optional<std::size_t> history_index(const std::string& key) const;
  std::string feature_name(std::size_t f) const;

  util::Json to_json() const;
  static FeatureSchema from_json(const util::Json& j);

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
    return a.concepts_ == b.concepts_ && a.ordinal_ == b.ordinal_ &&
           a.history_ == b.history_;
  }

 private:
  void index();

  std::vector<std::string> concepts_;
  std::vector<char> ordinal_;
  std::vector<std::string> history_;
  std::unordered_map<std::string, std::size_t> concept_pos_;
  std::unordered_map<std::string, std::size_t> history_pos_;
};

// An encoded row plus which concept features have been answered.
struct EncodedRow {
  std::vector<double> values;
  std::vector<char> known;
};

std::string history_key(int channel, const std::string& item);

// Assertions for concepts outside the schema are ignored.
EncodedRow encode_row(const FeatureSchema& schema, int age_years,
                      std::span<const cms::Assertion> assertions,
                      const History& history);

struct CohortData {
  CohortKey cohort;
  FeatureSchema schema;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> X;
  // Positive target indices per row.
  std::vector<std::vector<int>> Y;
};

struct PrepareOptions {
  std::size_t max_concepts = 1000;
  std::size_t max_targets = 50;
  std::size_t max_history_items = 200;
  // Minimum cohort size and minimum joint (diagnosis, cc) count.
  std::int64_t min_count = 100;
  double lift_threshold = stats::kLiftThreshold;
  bool use_history = true;
  int history_days = 180;
};

// Returns nullopt when the cohort has fewer than min_count encounters or no
// qualifying diagnosis; no model is trained for it.
std::optional<CohortData> prepare_cohort_data(
    std::span<const Encounter> dataset, const CohortKey& cohort,
    const stats::LiftTable& diagnosis_lift, const cms::ConceptCatalog& catalog,
    const PrepareOptions& options = {});

// Encounters grouped by their primary-cc cohort.
std::vector<CohortKey> cohorts_in(std::span<const Encounter> dataset);

}  // namespace triage::forest

#include "triage/forest/features.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "triage/error.hpp"

namespace triage::forest {

namespace {

constexpr const char* kAgeFeature = "demo:age_years";

template <typename Key>
std::vector<Key> top_by_count(const std::map<Key, std::int64_t>& counts,
                              std::size_t limit) {
  std::vector<std::pair<Key, std::int64_t>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  if (v.size() > limit) v.resize(limit);
  std::vector<Key> out;
  out.reserve(v.size());
  for (auto& [k, c] : v) out.push_back(k);
  return out;
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<std::string> concepts,
                             std::vector<char> ordinal,
                             std::vector<std::string> history_items)
    : concepts_(std::move(concepts)),
      ordinal_(std::move(ordinal)),
      history_(std::move(history_items)) {
  if (ordinal_.size() != concepts_.size()) {
    throw ShapeError("ordinal flags must align with concepts");
  }
  index();
}

void FeatureSchema::index() {
  concept_pos_.clear();
  history_pos_.clear();
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (!concept_pos_.emplace(concepts_[i], i).second) {
      throw ValidationError("duplicate feature concept " + concepts_[i]);
    }
  }
  for (std::size_t i = 0; i < history_.size(); ++i) {
    history_pos_.emplace(history_[i], i);
  }
}

std::optional<std::size_t> FeatureSchema::concept_index(
    const std::string& id) const {
  auto it = concept_pos_.find(id);
  if (it == concept_pos_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> FeatureSchema::history_index(
    const std::string& key) const {
  auto it = history_pos_.find(key);
  if (it == history_pos_.end()) return std::nullopt;
  return concepts_.size() + 1 + it->second;
}

std::string FeatureSchema::feature_name(std::size_t f) const {
  if (f < concepts_.size()) return concepts_[f];
  if (f == concepts_.size()) return kAgeFeature;
  if (f - concepts_.size() - 1 < history_.size()) {
    return "hx:" + history_[f - concepts_.size() - 1];
  }
  throw ShapeError("feature index out of range");
}

util::Json FeatureSchema::to_json() const {
  util::Json ord = util::Json::array();
  for (char c : ordinal_) ord.push_back(c != 0);
  return {{"concepts", concepts_}, {"ordinal", ord}, {"history", history_}};
}

FeatureSchema FeatureSchema::from_json(const util::Json& j) {
  auto concepts = util::get_field<std::vector<std::string>>(j, "concepts", "schema");
  auto ord = util::get_field<std::vector<bool>>(j, "ordinal", "schema");
  auto history = util::get_field<std::vector<std::string>>(j, "history", "schema");
  std::vector<char> ordinal(ord.begin(), ord.end());
  return FeatureSchema(std::move(concepts), std::move(ordinal), std::move(history));
}

std::string history_key(int channel, const std::string& item) {
  return std::string(channel_name(channel)) + ":" + item;
}

EncodedRow encode_row(const FeatureSchema& schema, int age_years,
                      std::span<const cms::Assertion> assertions,
                      const History& history) {
  EncodedRow row;
  row.values.assign(schema.size(), 0.0);
  row.known.assign(schema.size(), 1);
  for (std::size_t i = 0; i < schema.n_concepts(); ++i) {
    row.known[i] = 0;
    if (schema.ordinal()[i]) row.values[i] = -1.0;
  }
  row.values[schema.age_index()] = static_cast<double>(age_years);
  for (const cms::Assertion& a : assertions) {
    auto idx = schema.concept_index(a.concept_id);
    if (!idx) continue;
    row.known[*idx] = 1;
    double v = schema.ordinal()[*idx] ? -1.0 : 0.0;
    if (const auto* c = std::get_if<cms::Certainty>(&a.value)) {
      if (!schema.ordinal()[*idx]) {
        if (*c == cms::Certainty::kCertain) v = 1.0;
        if (*c == cms::Certainty::kAbsent) v = -1.0;
      }
    } else if (const auto* d = std::get_if<cms::DurationDays>(&a.value)) {
      v = schema.ordinal()[*idx] ? d->days : 1.0;
    } else if (const auto* s = std::get_if<cms::SeverityLevel>(&a.value)) {
      v = schema.ordinal()[*idx] ? s->level : 1.0;
    }
    row.values[*idx] = v;
  }
  if (!schema.history_items().empty()) {
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
      for (const HistoryEntry& entry : history.channels[ch]) {
        for (const std::string& item : entry.items) {
          if (auto f = schema.history_index(history_key(ch, item))) {
            row.values[*f] = 1.0;
          }
        }
      }
    }
  }
  return row;
}

std::vector<CohortKey> cohorts_in(std::span<const Encounter> dataset) {
  std::set<CohortKey> keys;
  for (const Encounter& e : dataset) {
    if (!e.chief_complaints.empty()) keys.insert(e.cohort());
  }
  return {keys.begin(), keys.end()};
}

std::optional<CohortData> prepare_cohort_data(
    std::span<const Encounter> dataset, const CohortKey& cohort,
    const stats::LiftTable& diagnosis_lift, const cms::ConceptCatalog& catalog,
    const PrepareOptions& options) {
  std::vector<const Encounter*> rows;
  for (const Encounter& e : dataset) {
    if (!e.chief_complaints.empty() && e.cohort() == cohort) rows.push_back(&e);
  }
  if (rows.empty() ||
      static_cast<std::int64_t>(rows.size()) < options.min_count) {
    return std::nullopt;
  }

  std::map<std::string, std::int64_t> concept_count;
  std::map<std::string, std::int64_t> history_count;
  std::map<std::string, std::int64_t> dx_count;
  for (const Encounter* e : rows) {
    std::set<std::string> seen;
    for (const auto& a : e->assertions) {
      const cms::Concept* c = catalog.find(a.concept_id);
      if (c == nullptr || c->response_type == cms::ResponseType::kFreeText) continue;
      if (seen.insert(a.concept_id).second) ++concept_count[a.concept_id];
    }
    if (options.use_history) {
      std::set<std::string> hseen;
      const History h = e->history.windowed(options.history_days);
      for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
        for (const auto& entry : h.channels[ch]) {
          for (const auto& item : entry.items) {
            auto key = history_key(ch, item);
            if (hseen.insert(key).second) ++history_count[key];
          }
        }
      }
    }
    std::set<std::string> dseen(e->outcomes.of(OutcomeKind::kDiagnosis).begin(),
                                e->outcomes.of(OutcomeKind::kDiagnosis).end());
    for (const auto& d : dseen) ++dx_count[d];
  }

  const auto retained = stats::filter_targets(
      diagnosis_lift, options.lift_threshold, options.min_count);
  std::map<std::string, std::int64_t> qualifying;
  for (const auto& [t, c] : retained) {
    if (c != cohort.chief_complaint) continue;
    auto it = dx_count.find(t);
    if (it != dx_count.end()) qualifying.emplace(t, it->second);
  }
  if (qualifying.empty()) return std::nullopt;

  CohortData out;
  out.cohort = cohort;
  out.targets = top_by_count(qualifying, options.max_targets);
  auto concepts = top_by_count(concept_count, options.max_concepts);
  std::vector<char> ordinal;
  for (const auto& id : concepts) {
    ordinal.push_back(catalog.at(id).response_evaluation !=
                      cms::ResponseEvaluation::kCategorical);
  }
  std::vector<std::string> history;
  if (options.use_history) {
    history = top_by_count(history_count, options.max_history_items);
  }
  out.schema = FeatureSchema(std::move(concepts), std::move(ordinal),
                             std::move(history));

  std::unordered_map<std::string, int> target_pos;
  for (std::size_t i = 0; i < out.targets.size(); ++i) {
    target_pos.emplace(out.targets[i], static_cast<int>(i));
  }
  out.X.reserve(rows.size());
  out.Y.reserve(rows.size());
  for (const Encounter* e : rows) {
    const History h = options.use_history ? e->history.windowed(options.history_days)
                                          : History{};
    out.X.push_back(encode_row(out.schema, e->age_years, e->assertions, h).values);
    std::vector<int> pos;
    for (const auto& d : e->outcomes.of(OutcomeKind::kDiagnosis)) {
      auto it = target_pos.find(d);
      if (it != target_pos.end()) pos.push_back(it->second);
    }
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    out.Y.push_back(std::move(pos));
  }
  return out;
}

}  // namespace triage::forest

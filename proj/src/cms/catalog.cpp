#include "triage/cms/catalog.hpp"

#include <algorithm>
#include <set>

#include "triage/error.hpp"

namespace triage::cms {

namespace {

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<ResponseType> kResponseTypes[] = {
    {ResponseType::kYesNo, "yes_no"},
    {ResponseType::kSingleSelect, "single_select"},
    {ResponseType::kMultiSelect, "multi_select"},
    {ResponseType::kDurationDropdown, "duration_dropdown"},
    {ResponseType::kSeverityScale, "severity_scale"},
    {ResponseType::kFreeText, "free_text"},
};

constexpr EnumName<NoteSection> kNoteSections[] = {
    {NoteSection::kCC, "CC"},
    {NoteSection::kHPI, "HPI"},
    {NoteSection::kROS, "ROS"},
    {NoteSection::kPE, "PE"},
};

constexpr EnumName<ResponseEvaluation> kEvaluations[] = {
    {ResponseEvaluation::kCategorical, "categorical"},
    {ResponseEvaluation::kOrdinalDuration, "ordinal_duration"},
    {ResponseEvaluation::kOrdinalSeverity, "ordinal_severity"},
};

constexpr EnumName<Certainty> kCertainties[] = {
    {Certainty::kCertain, "certain"},
    {Certainty::kAbsent, "absent"},
    {Certainty::kUnsure, "unsure"},
};

template <typename Enum, std::size_t N>
std::string name_of(const EnumName<Enum> (&table)[N], Enum v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename Enum, std::size_t N>
Enum parse_enum(const EnumName<Enum> (&table)[N], const std::string& s,
                const char* what) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  throw SchemaError(std::string("unknown ") + what + " \"" + s + "\"");
}

bool evaluation_matches(ResponseType t, ResponseEvaluation e) {
  const bool duration_type = t == ResponseType::kDurationDropdown;
  const bool severity_type = t == ResponseType::kSeverityScale;
  const bool duration_eval = e == ResponseEvaluation::kOrdinalDuration;
  const bool severity_eval = e == ResponseEvaluation::kOrdinalSeverity;
  return duration_type == duration_eval && severity_type == severity_eval;
}

Concept concept_from_json(const util::Json& j, const std::string& where) {
  Concept c;
  c.id = util::get_field<std::string>(j, "id", where);
  const std::string at = where + " (" + c.id + ")";
  c.canonical_name = util::get_field<std::string>(j, "canonical_name", at);
  c.synonyms = util::get_field<std::vector<std::string>>(j, "synonyms", at);
  c.patient_text = util::get_field<std::string>(j, "patient_text", at);
  c.response_type = parse_response_type(
      util::get_field<std::string>(j, "response_type", at));
  if (j.contains("stem") && !j["stem"].is_null()) {
    c.stem = util::get_field<std::string>(j, "stem", at);
  }
  if (j.contains("post_text") && !j["post_text"].is_null()) {
    c.post_text = util::get_field<std::string>(j, "post_text", at);
  }
  c.note_section =
      parse_note_section(util::get_field<std::string>(j, "note_section", at));
  c.response_evaluation = parse_response_evaluation(
      util::get_field<std::string>(j, "response_evaluation", at));
  if (j.contains("options")) {
    c.options = util::get_field<std::vector<std::string>>(j, "options", at);
  }
  return c;
}

}  // namespace

std::string to_string(ResponseType t) { return name_of(kResponseTypes, t); }
std::string to_string(NoteSection s) { return name_of(kNoteSections, s); }
std::string to_string(ResponseEvaluation e) {
  return name_of(kEvaluations, e);
}
std::string to_string(Certainty c) { return name_of(kCertainties, c); }

ResponseType parse_response_type(const std::string& s) {
  return parse_enum(kResponseTypes, s, "response_type");
}
NoteSection parse_note_section(const std::string& s) {
  return parse_enum(kNoteSections, s, "note_section");
}
ResponseEvaluation parse_response_evaluation(const std::string& s) {
  return parse_enum(kEvaluations, s, "response_evaluation");
}
Certainty parse_certainty(const std::string& s) {
  return parse_enum(kCertainties, s, "assertion value");
}

bool is_present(const AssertionValue& v) {
  if (const auto* c = std::get_if<Certainty>(&v)) {
    return *c == Certainty::kCertain;
  }
  return true;
}

bool is_absent(const AssertionValue& v) {
  const auto* c = std::get_if<Certainty>(&v);
  return c != nullptr && *c == Certainty::kAbsent;
}

bool is_informative(const AssertionValue& v) {
  const auto* c = std::get_if<Certainty>(&v);
  return c == nullptr || *c != Certainty::kUnsure;
}

std::string describe(const AssertionValue& v) {
  if (const auto* c = std::get_if<Certainty>(&v)) return to_string(*c);
  if (const auto* d = std::get_if<DurationDays>(&v)) {
    return "duration " + std::to_string(d->days) + "d";
  }
  return "severity " + std::to_string(std::get<SeverityLevel>(v).level);
}

util::Json assertion_to_json(const Assertion& a) {
  util::Json j{{"concept", a.concept_id}};
  if (const auto* c = std::get_if<Certainty>(&a.value)) {
    j["value"] = to_string(*c);
  } else if (const auto* d = std::get_if<DurationDays>(&a.value)) {
    j["duration_days"] = d->days;
  } else {
    j["severity"] = std::get<SeverityLevel>(a.value).level;
  }
  return j;
}

Assertion assertion_from_json(const util::Json& j) {
  Assertion a;
  a.concept_id = util::get_field<std::string>(j, "concept", "assertion");
  if (j.contains("value")) {
    a.value = parse_certainty(util::get_field<std::string>(j, "value", a.concept_id));
  } else if (j.contains("duration_days")) {
    a.value = DurationDays{util::get_field<int>(j, "duration_days", a.concept_id)};
  } else if (j.contains("severity")) {
    a.value = SeverityLevel{util::get_field<int>(j, "severity", a.concept_id)};
  } else {
    throw SchemaError("assertion for " + a.concept_id + " has no value");
  }
  return a;
}

ConceptCatalog ConceptCatalog::from_concepts(std::string version,
                                             std::vector<Concept> concepts) {
  ConceptCatalog cat;
  cat.version_ = std::move(version);
  cat.concepts_ = std::move(concepts);
  std::sort(cat.concepts_.begin(), cat.concepts_.end(),
            [](const Concept& a, const Concept& b) { return a.id < b.id; });
  cat.build_indexes();
  return cat;
}

ConceptCatalog ConceptCatalog::from_json(const util::Json& doc,
                                         const std::string& origin) {
  if (!doc.is_object()) throw SchemaError(origin + ": expected an object");
  std::string version = util::get_field<std::string>(doc, "version", origin);
  auto items = doc.find("concepts");
  if (items == doc.end() || !items->is_array()) {
    throw SchemaError(origin + ": \"concepts\" must be an array");
  }
  std::vector<Concept> concepts;
  for (std::size_t i = 0; i < items->size(); ++i) {
    concepts.push_back(concept_from_json(
        (*items)[i], origin + ": concepts[" + std::to_string(i) + "]"));
  }
  return from_concepts(std::move(version), std::move(concepts));
}

ConceptCatalog ConceptCatalog::load(const std::filesystem::path& path) {
  return from_json(util::read_json_file(path), path.string());
}

void ConceptCatalog::build_indexes() {
  by_id_.clear();
  synonym_owner_.clear();
  option_parent_.clear();
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    const Concept& c = concepts_[i];
    if (c.id.empty()) throw ValidationError("concept with empty id");
    if (!by_id_.emplace(c.id, i).second) {
      throw ValidationError("duplicate concept id \"" + c.id + "\"");
    }
    if (!evaluation_matches(c.response_type, c.response_evaluation)) {
      throw ValidationError("concept \"" + c.id + "\": response_type " +
                            to_string(c.response_type) +
                            " is inconsistent with response_evaluation " +
                            to_string(c.response_evaluation));
    }
  }
  // A concept id is a member of its own group; raw ids may belong to exactly
  // one group.
  auto claim = [&](const std::string& raw, const std::string& owner) {
    auto [it, inserted] = synonym_owner_.emplace(raw, owner);
    if (!inserted && it->second != owner) {
      throw ValidationError("raw concept \"" + raw +
                            "\" is grouped under both \"" + it->second +
                            "\" and \"" + owner + "\"");
    }
  };
  for (const Concept& c : concepts_) claim(c.id, c.id);
  for (const Concept& c : concepts_) {
    for (const std::string& raw : c.synonyms) claim(raw, c.id);
  }
  for (const Concept& c : concepts_) {
    const bool select = c.response_type == ResponseType::kSingleSelect ||
                        c.response_type == ResponseType::kMultiSelect;
    if (!c.options.empty() && !select) {
      throw ValidationError("concept \"" + c.id +
                            "\" lists options but is not a select question");
    }
    for (const std::string& opt : c.options) {
      const Concept* oc = find(opt);
      if (oc == nullptr) {
        throw ValidationError("concept \"" + c.id + "\" option \"" + opt +
                              "\" is not in the catalog");
      }
      if (oc->response_evaluation != ResponseEvaluation::kCategorical ||
          opt == c.id) {
        throw ValidationError("concept \"" + c.id + "\" option \"" + opt +
                              "\" must be a distinct categorical concept");
      }
      if (!option_parent_.emplace(opt, c.id).second) {
        throw ValidationError("option \"" + opt +
                              "\" belongs to more than one select question");
      }
    }
  }
}

util::Json ConceptCatalog::to_json() const {
  util::Json items = util::Json::array();
  for (const Concept& c : concepts_) {
    util::Json j{{"id", c.id},
                 {"canonical_name", c.canonical_name},
                 {"synonyms", c.synonyms},
                 {"patient_text", c.patient_text},
                 {"response_type", to_string(c.response_type)},
                 {"note_section", to_string(c.note_section)},
                 {"response_evaluation", to_string(c.response_evaluation)}};
    if (c.stem) j["stem"] = *c.stem;
    if (c.post_text) j["post_text"] = *c.post_text;
    if (!c.options.empty()) j["options"] = c.options;
    items.push_back(std::move(j));
  }
  return {{"version", version_}, {"concepts", std::move(items)}};
}

void ConceptCatalog::save(const std::filesystem::path& path) const {
  util::write_json_file(path, to_json());
}

const Concept* ConceptCatalog::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &concepts_[it->second];
}

const Concept& ConceptCatalog::at(std::string_view id) const {
  const Concept* c = find(id);
  if (c == nullptr) {
    throw NotFoundError("unknown concept \"" + std::string(id) + "\"");
  }
  return *c;
}

std::optional<std::string> ConceptCatalog::resolve_synonym(
    std::string_view raw_id) const {
  auto it = synonym_owner_.find(std::string(raw_id));
  if (it == synonym_owner_.end()) return std::nullopt;
  return it->second;
}

const std::string& ConceptCatalog::question_for(
    const std::string& concept_id) const {
  auto it = option_parent_.find(concept_id);
  return it == option_parent_.end() ? concept_id : it->second;
}

void ConceptCatalog::validate_assertion(const Assertion& a) const {
  const Concept& c = at(a.concept_id);
  switch (c.response_evaluation) {
    case ResponseEvaluation::kCategorical:
      if (!std::holds_alternative<Certainty>(a.value)) {
        throw ValidationError("concept \"" + c.id +
                              "\" takes certain/absent/unsure");
      }
      break;
    case ResponseEvaluation::kOrdinalDuration: {
      const auto* d = std::get_if<DurationDays>(&a.value);
      if (d == nullptr || d->days < 0) {
        throw ValidationError("concept \"" + c.id +
                              "\" takes a non-negative duration in days");
      }
      break;
    }
    case ResponseEvaluation::kOrdinalSeverity: {
      const auto* s = std::get_if<SeverityLevel>(&a.value);
      if (s == nullptr || s->level < 0 || s->level > kMaxSeverity) {
        throw ValidationError("concept \"" + c.id +
                              "\" takes a severity in [0,10]");
      }
      break;
    }
  }
}

}  // namespace triage::cms

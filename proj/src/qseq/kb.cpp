#include "triage/qseq/kb.hpp"

#include <algorithm>
#include <set>

#include "triage/error.hpp"

namespace triage::qseq {

namespace {

Literal::Kind parse_kind(const std::string& s) {
  if (s == "certain") return Literal::Kind::kCertain;
  if (s == "absent") return Literal::Kind::kAbsent;
  if (s == "unsure") return Literal::Kind::kUnsure;
  if (s == "present") return Literal::Kind::kPresent;
  if (s == "answered") return Literal::Kind::kAnswered;
  throw SchemaError("unknown literal value \"" + s + "\"");
}

const char* kind_name(Literal::Kind k) {
  switch (k) {
    case Literal::Kind::kCertain: return "certain";
    case Literal::Kind::kAbsent: return "absent";
    case Literal::Kind::kUnsure: return "unsure";
    case Literal::Kind::kPresent: return "present";
    case Literal::Kind::kAnswered: return "answered";
  }
  return "";
}

void require_concept(const cms::ConceptCatalog& catalog, const std::string& id,
                     const std::string& where) {
  if (!catalog.contains(id)) {
    throw ValidationError(where + " references unknown concept \"" + id + "\"");
  }
}

void check_predicate(const cms::ConceptCatalog& catalog, const Predicate& p,
                     const std::string& where) {
  for (const auto& l : p.asserted) require_concept(catalog, l.concept_id, where);
}

}  // namespace

bool Literal::holds(const AssertedMap& asserted) const {
  auto it = asserted.find(concept_id);
  if (it == asserted.end()) return false;
  const cms::AssertionValue& v = it->second.value;
  switch (kind) {
    case Kind::kAnswered: return true;
    case Kind::kPresent: return cms::is_present(v);
    case Kind::kAbsent: return cms::is_absent(v);
    case Kind::kCertain: {
      const auto* c = std::get_if<cms::Certainty>(&v);
      return c != nullptr && *c == cms::Certainty::kCertain;
    }
    case Kind::kUnsure: {
      const auto* c = std::get_if<cms::Certainty>(&v);
      return c != nullptr && *c == cms::Certainty::kUnsure;
    }
  }
  return false;
}

bool Predicate::holds(const CohortKey& cohort, const AssertedMap& state) const {
  if (sex && *sex != cohort.sex) return false;
  if (age_bin_min && cohort.age_bin < *age_bin_min) return false;
  if (age_bin_max && cohort.age_bin > *age_bin_max) return false;
  if (!chief_complaints.empty() &&
      std::find(chief_complaints.begin(), chief_complaints.end(),
                cohort.chief_complaint) == chief_complaints.end()) {
    return false;
  }
  for (const Literal& l : asserted) {
    if (!l.holds(state)) return false;
  }
  return true;
}

bool Predicate::empty() const {
  return !sex && !age_bin_min && !age_bin_max && chief_complaints.empty() &&
         asserted.empty();
}

Literal literal_from_json(const util::Json& j) {
  Literal l;
  l.concept_id = util::get_field<std::string>(j, "concept", "literal");
  l.kind = parse_kind(util::get_field<std::string>(j, "value", "literal"));
  return l;
}

util::Json literal_to_json(const Literal& l) {
  return {{"concept", l.concept_id}, {"value", kind_name(l.kind)}};
}

Predicate predicate_from_json(const util::Json& j) {
  if (!j.is_object()) throw SchemaError("predicate must be an object");
  Predicate p;
  if (j.contains("sex")) p.sex = parse_sex(j.at("sex").get<std::string>());
  if (j.contains("age_bin_min")) p.age_bin_min = j.at("age_bin_min").get<int>();
  if (j.contains("age_bin_max")) p.age_bin_max = j.at("age_bin_max").get<int>();
  if (j.contains("chief_complaints")) {
    p.chief_complaints = j.at("chief_complaints").get<std::vector<std::string>>();
  }
  if (j.contains("asserted")) {
    for (const auto& l : j.at("asserted")) p.asserted.push_back(literal_from_json(l));
  }
  return p;
}

util::Json predicate_to_json(const Predicate& p) {
  util::Json j = util::Json::object();
  if (p.sex) j["sex"] = to_string(*p.sex);
  if (p.age_bin_min) j["age_bin_min"] = *p.age_bin_min;
  if (p.age_bin_max) j["age_bin_max"] = *p.age_bin_max;
  if (!p.chief_complaints.empty()) j["chief_complaints"] = p.chief_complaints;
  if (!p.asserted.empty()) {
    util::Json arr = util::Json::array();
    for (const auto& l : p.asserted) arr.push_back(literal_to_json(l));
    j["asserted"] = arr;
  }
  return j;
}

const PrerequisiteRule* KnowledgeBase::prerequisite_for(
    const std::string& target) const {
  for (const auto& r : prerequisites) {
    if (r.target == target) return &r;
  }
  return nullptr;
}

const std::vector<ScriptedStep>& KnowledgeBase::script_for(
    const std::string& cc) const {
  static const std::vector<ScriptedStep> kEmpty;
  auto it = scripted_hpi.find(cc);
  return it == scripted_hpi.end() ? kEmpty : it->second;
}

void KnowledgeBase::validate(const cms::ConceptCatalog& catalog) const {
  std::map<std::string, std::string> prereq_of;
  for (const auto& r : prerequisites) {
    require_concept(catalog, r.target, "prerequisite rule");
    require_concept(catalog, r.prerequisite, "prerequisite rule");
    if (!prereq_of.emplace(r.target, r.prerequisite).second) {
      throw ValidationError("concept \"" + r.target +
                            "\" has more than one prerequisite rule");
    }
  }
  // Each target has one outgoing edge, so a cycle shows up as a revisit
  // while following the chain.
  for (const auto& [start, first] : prereq_of) {
    std::set<std::string> seen{start};
    std::string cur = first;
    while (true) {
      if (!seen.insert(cur).second) {
        throw ValidationError("prerequisite cycle through \"" + cur + "\"");
      }
      auto it = prereq_of.find(cur);
      if (it == prereq_of.end()) break;
      cur = it->second;
    }
  }
  std::set<std::string> ids;
  for (const auto& f : fixers) {
    if (!ids.insert("fixer:" + f.id).second) {
      throw ValidationError("duplicate fixer id \"" + f.id + "\"");
    }
    check_predicate(catalog, f.when, "fixer " + f.id);
    for (const auto& b : f.blocked) require_concept(catalog, b, "fixer " + f.id);
  }
  for (const auto& r : inference_rules) {
    if (!ids.insert("rule:" + r.id).second) {
      throw ValidationError("duplicate inference rule id \"" + r.id + "\"");
    }
    if (r.antecedents.empty() || r.consequents.empty()) {
      throw ValidationError("inference rule " + r.id +
                            " needs antecedents and consequents");
    }
    for (const auto& l : r.antecedents) {
      require_concept(catalog, l.concept_id, "inference rule " + r.id);
    }
    for (const auto& a : r.consequents) {
      require_concept(catalog, a.concept_id, "inference rule " + r.id);
      catalog.validate_assertion(a);
    }
  }
  for (const auto& [cc, steps] : scripted_hpi) {
    for (const auto& s : steps) {
      require_concept(catalog, s.concept_id, "scripted HPI for " + cc);
      check_predicate(catalog, s.when, "scripted HPI for " + cc);
    }
  }
}

KnowledgeBase KnowledgeBase::from_json(const util::Json& doc,
                                       const cms::ConceptCatalog& catalog) {
  if (!doc.is_object()) throw SchemaError("kb: document must be an object");
  KnowledgeBase kb;
  try {
    for (const auto& r : doc.value("prerequisites", util::Json::array())) {
      kb.prerequisites.push_back(
          {util::get_field<std::string>(r, "target", "prerequisite"),
           util::get_field<std::string>(r, "prerequisite", "prerequisite"),
           r.value("ask_prereq_first", false)});
    }
    for (const auto& f : doc.value("fixers", util::Json::array())) {
      FixerRule rule;
      rule.id = util::get_field<std::string>(f, "id", "fixer");
      if (f.contains("when")) rule.when = predicate_from_json(f.at("when"));
      rule.blocked = util::get_field<std::vector<std::string>>(f, "block", "fixer " + rule.id);
      kb.fixers.push_back(std::move(rule));
    }
    for (const auto& r : doc.value("inference_rules", util::Json::array())) {
      InferenceRule rule;
      rule.id = util::get_field<std::string>(r, "id", "inference rule");
      for (const auto& l : r.at("if")) rule.antecedents.push_back(literal_from_json(l));
      for (const auto& a : r.at("then")) {
        rule.consequents.push_back(cms::assertion_from_json(a));
      }
      kb.inference_rules.push_back(std::move(rule));
    }
    const util::Json scripts = doc.value("scripted_hpi", util::Json::object());
    for (const auto& [cc, steps] : scripts.items()) {
      auto& out = kb.scripted_hpi[cc];
      for (const auto& s : steps) {
        if (s.is_string()) {
          out.push_back({s.get<std::string>(), {}});
        } else {
          ScriptedStep step;
          step.concept_id = util::get_field<std::string>(s, "concept", "scripted step");
          if (s.contains("when")) step.when = predicate_from_json(s.at("when"));
          out.push_back(std::move(step));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("kb: ") + e.what());
  }
  kb.validate(catalog);
  return kb;
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path,
                                  const cms::ConceptCatalog& catalog) {
  return from_json(util::read_json_file(path), catalog);
}

util::Json KnowledgeBase::to_json() const {
  util::Json prereq = util::Json::array();
  for (const auto& r : prerequisites) {
    prereq.push_back({{"target", r.target},
                      {"prerequisite", r.prerequisite},
                      {"ask_prereq_first", r.ask_prereq_first}});
  }
  util::Json fix = util::Json::array();
  for (const auto& f : fixers) {
    fix.push_back({{"id", f.id}, {"when", predicate_to_json(f.when)}, {"block", f.blocked}});
  }
  util::Json inf = util::Json::array();
  for (const auto& r : inference_rules) {
    util::Json ifs = util::Json::array();
    for (const auto& l : r.antecedents) ifs.push_back(literal_to_json(l));
    util::Json thens = util::Json::array();
    for (const auto& a : r.consequents) thens.push_back(cms::assertion_to_json(a));
    inf.push_back({{"id", r.id}, {"if", ifs}, {"then", thens}});
  }
  util::Json scripted = util::Json::object();
  for (const auto& [cc, steps] : scripted_hpi) {
    util::Json arr = util::Json::array();
    for (const auto& s : steps) {
      if (s.when.empty()) {
        arr.push_back(s.concept_id);
      } else {
        arr.push_back({{"concept", s.concept_id}, {"when", predicate_to_json(s.when)}});
      }
    }
    scripted[cc] = arr;
  }
  return {{"prerequisites", prereq},
          {"fixers", fix},
          {"inference_rules", inf},
          {"scripted_hpi", scripted}};
}

}  // namespace triage::qseq

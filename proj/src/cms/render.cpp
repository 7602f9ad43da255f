#include "triage/cms/render.hpp"

#include "triage/error.hpp"

namespace triage::cms {

const std::vector<std::pair<std::string, int>>& duration_choices() {
  static const std::vector<std::pair<std::string, int>> kChoices = {
      {"Less than a day", 0}, {"1 day", 1},        {"2 days", 2},
      {"3 days", 3},          {"4-6 days", 5},     {"1 week", 7},
      {"2 weeks", 14},        {"1 month", 30},     {"3 months", 90},
      {"6 months", 180},      {"1 year or more", 365},
  };
  return kChoices;
}

Sense sense_of(const AssertionValue& v) {
  if (const auto* c = std::get_if<Certainty>(&v)) {
    switch (*c) {
      case Certainty::kCertain:
        return Sense::kPositive;
      case Certainty::kAbsent:
        return Sense::kNegative;
      case Certainty::kUnsure:
        return Sense::kUncertain;
    }
  }
  return Sense::kPositive;
}

std::string to_string(Sense s) {
  switch (s) {
    case Sense::kPositive:
      return "positive";
    case Sense::kNegative:
      return "negative";
    case Sense::kUncertain:
      return "uncertain";
  }
  return "?";
}

std::string clinical_phrase(const Concept& c, const AssertionValue& v) {
  const std::string& name = c.canonical_name;
  if (const auto* cert = std::get_if<Certainty>(&v)) {
    switch (*cert) {
      case Certainty::kCertain:
        return "Patient reports " + name + ".";
      case Certainty::kAbsent:
        return "Patient denies " + name + ".";
      case Certainty::kUnsure:
        return "Patient is unsure about " + name + ".";
    }
  }
  if (const auto* d = std::get_if<DurationDays>(&v)) {
    return name + " for " + std::to_string(d->days) +
           (d->days == 1 ? " day." : " days.");
  }
  return name + ", severity " +
         std::to_string(std::get<SeverityLevel>(v).level) + "/10.";
}

namespace {

std::vector<AnswerOption> yes_no_options(const std::string& id) {
  return {{"Yes", {id, Certainty::kCertain}},
          {"No", {id, Certainty::kAbsent}},
          {"Not sure", {id, Certainty::kUnsure}}};
}

std::vector<AnswerOption> patient_options(const ConceptCatalog& catalog,
                                          const Concept& c) {
  std::vector<AnswerOption> options;
  switch (c.response_type) {
    case ResponseType::kYesNo:
      return yes_no_options(c.id);
    case ResponseType::kSingleSelect:
    case ResponseType::kMultiSelect:
      if (c.options.empty()) return yes_no_options(c.id);
      for (const std::string& opt : c.options) {
        options.push_back(
            {catalog.at(opt).patient_text, {opt, Certainty::kCertain}});
      }
      return options;
    case ResponseType::kDurationDropdown:
      for (const auto& [label, days] : duration_choices()) {
        options.push_back({label, {c.id, DurationDays{days}}});
      }
      return options;
    case ResponseType::kSeverityScale:
      for (int level = 0; level <= kMaxSeverity; ++level) {
        options.push_back({std::to_string(level), {c.id, SeverityLevel{level}}});
      }
      return options;
    case ResponseType::kFreeText:
      // The typed text is kept verbatim by the session; the assertion only
      // records that a response was given.
      return {{"Type your answer", {c.id, Certainty::kCertain}}};
  }
  return options;
}

}  // namespace

RenderedQuestion render_question(const ConceptCatalog& catalog,
                                 const std::string& concept_id,
                                 RenderMode mode,
                                 const AssertionValue* answer) {
  const Concept& c = catalog.at(concept_id);
  RenderedQuestion q;
  q.concept_id = c.id;
  q.options = patient_options(catalog, c);

  if (mode == RenderMode::kPatient) {
    std::string text;
    if (c.stem) text = *c.stem + " ";
    text += c.patient_text;
    if (c.post_text) text += " " + *c.post_text;
    q.text = std::move(text);
    return q;
  }

  if (answer != nullptr) {
    catalog.validate_assertion({c.id, *answer});
    q.text = clinical_phrase(c, *answer);
    q.sense = sense_of(*answer);
    return q;
  }
  q.text = c.canonical_name;
  for (AnswerOption& opt : q.options) {
    opt.label = clinical_phrase(catalog.at(opt.assertion.concept_id),
                                opt.assertion.value);
  }
  return q;
}

}  // namespace triage::cms

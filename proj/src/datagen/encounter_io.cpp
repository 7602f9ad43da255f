#include <algorithm>

#include "triage/datagen/encounter.hpp"
#include "triage/error.hpp"

namespace triage {

namespace {

const std::array<std::string, kNumAgeBins> kAgeBinLabels = {
    "0-1",   "2-15",  "16-20", "21-29", "30-39", "40-49",
    "50-59", "60-69", "70-79", "80-89", "90+"};

constexpr const char* kChannelNames[kNumHistoryChannels] = {
    "diagnoses", "prescriptions", "procedures", "chief_complaints"};

constexpr const char* kOutcomeNames[kNumOutcomeKinds] = {
    "diagnoses", "medications", "labs", "imaging"};

}  // namespace

int age_bin_of(int age_years) {
  if (age_years < 0) throw ValidationError("negative age");
  if (age_years <= 1) return 0;
  if (age_years <= 15) return 1;
  if (age_years <= 20) return 2;
  if (age_years <= 29) return 3;
  if (age_years >= 90) return 10;
  return 4 + (age_years - 30) / 10;
}

const std::string& age_bin_label(int bin) {
  if (bin < 0 || bin >= kNumAgeBins) throw ValidationError("bad age bin");
  return kAgeBinLabels[bin];
}

std::string to_string(Sex s) { return s == Sex::kFemale ? "female" : "male"; }

Sex parse_sex(const std::string& s) {
  if (s == "female") return Sex::kFemale;
  if (s == "male") return Sex::kMale;
  throw SchemaError("unknown sex \"" + s + "\"");
}

std::string CohortKey::file_stem() const {
  return chief_complaint + "_" + age_bin_label(age_bin) + "_" +
         to_string(sex);
}

const char* channel_name(int channel) { return kChannelNames[channel]; }
const char* outcome_kind_name(int kind) { return kOutcomeNames[kind]; }

OutcomeKind parse_outcome_kind(const std::string& s) {
  for (int k = 0; k < kNumOutcomeKinds; ++k) {
    if (s == kOutcomeNames[k]) return static_cast<OutcomeKind>(k);
  }
  if (s == "diagnosis") return OutcomeKind::kDiagnosis;
  if (s == "medication") return OutcomeKind::kMedication;
  if (s == "lab") return OutcomeKind::kLab;
  throw SchemaError("unknown target kind \"" + s + "\"");
}

History History::windowed(int lookback_days) const {
  History out;
  for (int c = 0; c < kNumHistoryChannels; ++c) {
    for (const HistoryEntry& e : channels[c]) {
      if (e.days_ago <= lookback_days) out.channels[c].push_back(e);
    }
  }
  return out;
}

bool History::empty() const {
  return std::all_of(channels.begin(), channels.end(),
                     [](const auto& ch) { return ch.empty(); });
}

CohortKey Encounter::cohort() const {
  if (chief_complaints.empty()) {
    throw ValidationError("encounter " + encounter_id +
                          " has no chief complaint");
  }
  return {chief_complaints.front(), age_bin, sex};
}

util::Json history_to_json(const History& h) {
  util::Json out = util::Json::object();
  for (int c = 0; c < kNumHistoryChannels; ++c) {
    util::Json entries = util::Json::array();
    for (const HistoryEntry& e : h.channels[c]) {
      entries.push_back({{"days_ago", e.days_ago}, {"items", e.items}});
    }
    out[kChannelNames[c]] = std::move(entries);
  }
  return out;
}

History history_from_json(const util::Json& j) {
  History h;
  for (int c = 0; c < kNumHistoryChannels; ++c) {
    auto it = j.find(kChannelNames[c]);
    if (it == j.end()) continue;
    int last_days = -1;
    for (const util::Json& e : *it) {
      HistoryEntry entry;
      entry.days_ago = util::get_field<int>(e, "days_ago", "history entry");
      entry.items =
          util::get_field<std::vector<std::string>>(e, "items", "history entry");
      if (last_days >= 0 && entry.days_ago > last_days) {
        throw ValidationError(std::string("history channel ") +
                              kChannelNames[c] + " is not date-ascending");
      }
      last_days = entry.days_ago;
      h.channels[c].push_back(std::move(entry));
    }
  }
  return h;
}

util::Json encounter_to_json(const Encounter& e) {
  util::Json assertions = util::Json::array();
  for (const auto& a : e.assertions) {
    assertions.push_back(cms::assertion_to_json(a));
  }
  util::Json outcomes = util::Json::object();
  for (int k = 0; k < kNumOutcomeKinds; ++k) {
    outcomes[kOutcomeNames[k]] = e.outcomes.codes[k];
  }
  util::Json findings = util::Json::array();
  for (const auto& a : e.latent.findings) {
    findings.push_back(cms::assertion_to_json(a));
  }
  return {{"patient_id", e.patient_id},
          {"encounter_id", e.encounter_id},
          {"age_years", e.age_years},
          {"age_bin", age_bin_label(e.age_bin)},
          {"sex", to_string(e.sex)},
          {"reason_text", e.reason_text},
          {"chief_complaints", e.chief_complaints},
          {"assertions", std::move(assertions)},
          {"history", history_to_json(e.history)},
          {"outcomes", std::move(outcomes)},
          {"latent",
           {{"condition", e.latent.condition},
            {"findings", std::move(findings)}}}};
}

Encounter encounter_from_json(const util::Json& j) {
  Encounter e;
  const std::string where = "encounter";
  e.patient_id = util::get_field<std::string>(j, "patient_id", where);
  e.encounter_id = j.value("encounter_id", e.patient_id);
  e.age_years = util::get_field<int>(j, "age_years", where);
  e.age_bin = age_bin_of(e.age_years);
  e.sex = parse_sex(util::get_field<std::string>(j, "sex", where));
  e.reason_text = j.value("reason_text", "");
  e.chief_complaints =
      util::get_field<std::vector<std::string>>(j, "chief_complaints", where);
  if (auto it = j.find("assertions"); it != j.end()) {
    for (const auto& a : *it) e.assertions.push_back(cms::assertion_from_json(a));
  }
  if (auto it = j.find("history"); it != j.end()) {
    e.history = history_from_json(*it);
  }
  if (auto it = j.find("outcomes"); it != j.end()) {
    for (int k = 0; k < kNumOutcomeKinds; ++k) {
      if (it->contains(kOutcomeNames[k])) {
        e.outcomes.codes[k] =
            (*it)[kOutcomeNames[k]].get<std::vector<std::string>>();
      }
    }
  }
  if (auto it = j.find("latent"); it != j.end()) {
    e.latent.condition = it->value("condition", -1);
    if (it->contains("findings")) {
      for (const auto& a : (*it)["findings"]) {
        e.latent.findings.push_back(cms::assertion_from_json(a));
      }
    }
  }
  return e;
}

std::vector<Encounter> read_encounters(const std::filesystem::path& path) {
  std::vector<Encounter> out;
  util::for_each_jsonl(path, [&](const util::Json& j) {
    out.push_back(encounter_from_json(j));
  });
  return out;
}

void write_encounters(const std::filesystem::path& path,
                      const std::vector<Encounter>& encounters) {
  std::string out;
  for (const Encounter& e : encounters) {
    out += encounter_to_json(e).dump();
    out += '\n';
  }
  util::write_text_file(path, out);
}

bool in_test_split(const std::string& patient_id, double test_fraction,
                   std::uint64_t salt) {
  // FNV-1a, stable across platforms.
  std::uint64_t h = 1469598103934665603ULL ^ salt;
  for (unsigned char ch : patient_id) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  h ^= h >> 29;
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < test_fraction;
}

}  // namespace triage

#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "triage/cms/catalog.hpp"
#include "triage/util/json_io.hpp"

namespace triage {

enum class Sex { kFemale, kMale };

// Eleven age groups: 0-1, 2-15, 16-20, 21-29, 30-39, ..., 80-89, 90+.
inline constexpr int kNumAgeBins = 11;

int age_bin_of(int age_years);
const std::string& age_bin_label(int bin);
std::string to_string(Sex s);
Sex parse_sex(const std::string& s);

struct CohortKey {
  std::string chief_complaint;
  int age_bin = 0;
  Sex sex = Sex::kFemale;

  auto operator<=>(const CohortKey&) const = default;
  // "<cc>_<agebin>_<sex>", used for model file names.
  std::string file_stem() const;
};

enum class HistoryChannel {
  kDiagnoses = 0,
  kPrescriptions = 1,
  kProcedures = 2,
  kChiefComplaints = 3,
};
inline constexpr int kNumHistoryChannels = 4;
inline constexpr int kMaxHistoryEntries = 8;
const char* channel_name(int channel);

// One prior encounter's items for a channel.
struct HistoryEntry {
  int days_ago = 0;
  std::vector<std::string> items;
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// Each channel is date-ascending (oldest first) with at most eight entries.
struct History {
  std::array<std::vector<HistoryEntry>, kNumHistoryChannels> channels;

  // Drops entries older than `lookback_days`.
  History windowed(int lookback_days) const;
  bool empty() const;
  friend bool operator==(const History&, const History&) = default;
};

enum class OutcomeKind { kDiagnosis = 0, kMedication, kLab, kImaging };
inline constexpr int kNumOutcomeKinds = 4;
const char* outcome_kind_name(int kind);
OutcomeKind parse_outcome_kind(const std::string& s);

struct Outcomes {
  std::array<std::vector<std::string>, kNumOutcomeKinds> codes;
  const std::vector<std::string>& of(OutcomeKind k) const {
    return codes[static_cast<int>(k)];
  }
};

// Hidden ground truth; never used as model input.
struct LatentTruth {
  int condition = -1;  // -1 = healthy
  // Every present finding with its value (categorical "certain" or ordinal).
  std::vector<cms::Assertion> findings;
};

struct Encounter {
  std::string patient_id;
  std::string encounter_id;
  int age_years = 0;
  int age_bin = 0;
  Sex sex = Sex::kFemale;
  std::string reason_text;
  std::vector<std::string> chief_complaints;  // primary first
  std::vector<cms::Assertion> assertions;
  History history;
  Outcomes outcomes;
  LatentTruth latent;

  CohortKey cohort() const;
};

util::Json history_to_json(const History& h);
History history_from_json(const util::Json& j);
util::Json encounter_to_json(const Encounter& e);
Encounter encounter_from_json(const util::Json& j);

std::vector<Encounter> read_encounters(const std::filesystem::path& path);
void write_encounters(const std::filesystem::path& path,
                      const std::vector<Encounter>& encounters);

// Deterministic patient-disjoint split: a patient lands in the test side when
// a hash of its id falls below `test_fraction`.
bool in_test_split(const std::string& patient_id, double test_fraction,
                   std::uint64_t salt = 0);

}  // namespace triage

#include <algorithm>
#include <random>

#include "triage/cms/render.hpp"
#include "triage/datagen/world.hpp"
#include "triage/error.hpp"

namespace triage::datagen {

namespace {

constexpr int kAgeLo[kNumAgeBins] = {0, 2, 16, 21, 30, 40, 50, 60, 70, 80, 90};
constexpr int kAgeHi[kNumAgeBins] = {1, 15, 20, 29, 39, 49, 59, 69, 79, 89, 100};
constexpr int kMaxLookback = 365;

const std::vector<std::string> kFiller = {
    "please", "doctor", "help", "worse", "today", "really",
    "need",   "advice", "mild", "bad",   "again", "still"};

const std::vector<std::string> kFollowup = {
    "follow up", "follow up appointment", "check up visit", "recheck visit",
    "follow up on results", "appointment to check in"};

using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

bool coin(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

int pick(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

const std::string& pick(Rng& rng, const std::vector<std::string>& v) {
  return v[pick(rng, static_cast<int>(v.size()))];
}

std::string cc_phrase(const ChiefComplaint& cc, Rng& rng) {
  const std::string& a = pick(rng, cc.keywords);
  const std::string& b = pick(rng, cc.keywords);
  switch (pick(rng, 5)) {
    case 0:
      return a;
    case 1:
      return a == b ? a : a + " and " + b;
    case 2:
      return "having " + a;
    case 3:
      return a + " pain";
    default:
      return "my " + a + " is worse";
  }
}

std::string duration_phrase(Rng& rng) {
  switch (pick(rng, 4)) {
    case 0:
      return "for " + std::to_string(1 + pick(rng, 9)) + " days";
    case 1:
      return "for " + std::to_string(1 + pick(rng, 4)) + " weeks";
    case 2:
      return "started yesterday";
    default:
      return "since last week";
  }
}

std::string text_for(const WorldModel& w, const std::vector<int>& ccs,
                     Rng& rng) {
  std::string text = cc_phrase(w.chief_complaints[ccs[0]], rng);
  for (std::size_t i = 1; i < ccs.size(); ++i) {
    text += " and " + cc_phrase(w.chief_complaints[ccs[i]], rng);
  }
  if (coin(rng, 0.5)) text += " " + duration_phrase(rng);
  if (coin(rng, w.config.text_confusion) && w.chief_complaints.size() > 1) {
    text += " " + pick(rng, w.chief_complaints[pick(
                                rng, static_cast<int>(w.chief_complaints.size()))]
                                .keywords);
  }
  if (coin(rng, 0.5)) text += " " + pick(rng, kFiller);
  return text;
}

struct PriorVisit {
  int days_ago;
  int condition;  // index; conditions.size() = healthy
  int cc;
};

void emit_visit(const WorldModel& w, const PriorVisit& v, Rng& rng,
                std::array<std::vector<HistoryEntry>, kNumHistoryChannels>& out) {
  std::array<std::vector<std::string>, kNumHistoryChannels> items;
  auto emit_kind = [&](OutcomeKind kind, int channel) {
    const auto& row = w.outcome_row(v.condition, kind);
    const auto& vocab = w.outcome_vocab[static_cast<int>(kind)];
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (coin(rng, row[i])) items[channel].push_back(vocab[i]);
    }
  };
  emit_kind(OutcomeKind::kDiagnosis, 0);
  emit_kind(OutcomeKind::kMedication, 1);
  emit_kind(OutcomeKind::kLab, 2);
  emit_kind(OutcomeKind::kImaging, 2);
  items[3].push_back(w.chief_complaints[v.cc].id);
  for (int c = 0; c < kNumHistoryChannels; ++c) {
    if (!items[c].empty()) out[c].push_back({v.days_ago, std::move(items[c])});
  }
}

}  // namespace

std::string sample_reason_text(const WorldModel& world, int cc,
                               std::uint64_t seed) {
  Rng rng = make_rng(world.seed, 0xC0FFEEULL, seed);
  return text_for(world, {cc}, rng);
}

Encounter sample_encounter(const WorldModel& w, std::uint64_t index,
                           int lookback_days, std::uint64_t stream) {
  if (lookback_days < 0) throw ValidationError("lookback must be >= 0");
  Rng rng = make_rng(w.seed, stream, index);
  const WorldConfig& cfg = w.config;
  const int K = static_cast<int>(w.conditions.size());
  const int n_cc = static_cast<int>(w.chief_complaints.size());

  Encounter e;
  e.patient_id = "p" + std::to_string(stream) + "-" + std::to_string(index);
  e.encounter_id = "e" + std::to_string(stream) + "-" + std::to_string(index);

  std::discrete_distribution<int> age_dist(w.age_bin_weights.begin(),
                                           w.age_bin_weights.end());
  e.age_bin = age_dist(rng);
  e.age_years = std::uniform_int_distribution<int>(kAgeLo[e.age_bin],
                                                   kAgeHi[e.age_bin])(rng);
  e.sex = coin(rng, w.female_rate) ? Sex::kFemale : Sex::kMale;

  std::discrete_distribution<int> cc_dist(w.cc_weights.begin(),
                                          w.cc_weights.end());
  std::vector<int> ccs{cc_dist(rng)};
  if (n_cc > 1 && coin(rng, cfg.second_cc_rate)) {
    int other = pick(rng, n_cc - 1);
    if (other >= ccs[0]) ++other;
    ccs.push_back(other);
  }
  for (int c : ccs) e.chief_complaints.push_back(w.chief_complaints[c].id);
  const CohortKey key = e.cohort();

  // Latent condition (index K = healthy).
  std::vector<double> weights = w.prior(key);
  weights.push_back(w.healthy_prior(key));
  const int k = std::discrete_distribution<int>(weights.begin(), weights.end())(rng);
  e.latent.condition = k == K ? -1 : k;

  // Findings.
  for (std::size_t i = 0; i < w.base_concepts.size(); ++i) {
    const BaseConcept& b = w.base_concepts[i];
    const double p = w.emission(k, static_cast<int>(i), e.sex);
    if (coin(rng, p)) {
      e.latent.findings.push_back({b.id, cms::Certainty::kCertain});
      if (!b.duration_id.empty()) {
        const auto& choices = cms::duration_choices();
        e.latent.findings.push_back(
            {b.duration_id,
             cms::DurationDays{choices[pick(rng, static_cast<int>(choices.size()))].second}});
      }
      if (!b.severity_id.empty()) {
        e.latent.findings.push_back(
            {b.severity_id, cms::SeverityLevel{1 + pick(rng, cms::kMaxSeverity)}});
      }
    } else {
      const double d = w.relevant[ccs[0]][i] ? cfg.absent_density
                                             : cfg.absent_density_background;
      if (coin(rng, d)) e.assertions.push_back({b.id, cms::Certainty::kAbsent});
    }
  }
  e.assertions.insert(e.assertions.begin(), e.latent.findings.begin(),
                      e.latent.findings.end());

  // Outcomes.
  for (int kind = 0; kind < kNumOutcomeKinds; ++kind) {
    const auto& row = w.outcome_row(k, static_cast<OutcomeKind>(kind));
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (coin(rng, row[i])) e.outcomes.codes[kind].push_back(w.outcome_vocab[kind][i]);
    }
  }

  // History. Chronic conditions leave traces in prior visits; follow-up
  // visits always have a recent related visit for the same complaint.
  const bool followup = coin(rng, cfg.followup_rate);
  const bool chronic = k < K && w.conditions[k].chronic;
  std::vector<PriorVisit> visits;
  const int n_prior = std::uniform_int_distribution<int>(0, cfg.max_prior_encounters)(rng);
  for (int v = 0; v < n_prior; ++v) {
    PriorVisit pv;
    pv.days_ago = 1 + pick(rng, kMaxLookback);
    if (chronic && coin(rng, cfg.history_strength)) {
      pv.condition = k;
      pv.cc = coin(rng, 0.7) ? ccs[0] : cc_dist(rng);
    } else {
      pv.condition = pick(rng, K + 1);
      pv.cc = cc_dist(rng);
    }
    visits.push_back(pv);
  }
  if (followup) visits.push_back({7 + pick(rng, 84), k, ccs[0]});
  std::sort(visits.begin(), visits.end(),
            [](const PriorVisit& a, const PriorVisit& b) {
              return a.days_ago > b.days_ago;
            });
  std::array<std::vector<HistoryEntry>, kNumHistoryChannels> channels;
  for (const PriorVisit& v : visits) emit_visit(w, v, rng, channels);
  for (int c = 0; c < kNumHistoryChannels; ++c) {
    auto& ch = channels[c];
    std::erase_if(ch, [&](const HistoryEntry& h) {
      return h.days_ago > lookback_days;
    });
    if (ch.size() > kMaxHistoryEntries) {
      ch.erase(ch.begin(), ch.end() - kMaxHistoryEntries);
    }
    e.history.channels[c] = std::move(ch);
  }

  if (followup) {
    e.reason_text = pick(rng, kFollowup);
    if (coin(rng, 0.3)) e.reason_text += " " + pick(rng, kFiller);
  } else {
    e.reason_text = text_for(w, ccs, rng);
  }
  return e;
}

std::vector<Encounter> sample_dataset(const WorldModel& world,
                                      std::size_t n_encounters,
                                      int lookback_days, std::uint64_t stream) {
  std::vector<Encounter> out;
  out.reserve(n_encounters);
  for (std::size_t i = 0; i < n_encounters; ++i) {
    out.push_back(sample_encounter(world, i, lookback_days, stream));
  }
  return out;
}

}  // namespace triage::datagen

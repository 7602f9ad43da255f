#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "triage/datagen/world.hpp"
#include "triage/error.hpp"

namespace triage::datagen {

namespace {

// Encounter share per age group, from a primary-care booking population.
const std::vector<double> kAgeBinWeights = {3.1, 8.9,  2.1, 15.9, 20.3, 15.0,
                                            13.3, 12.5, 6.4, 1.9,  0.4};

const std::vector<std::string> kWordBank = {
    "cough",     "fever",        "headache",  "rash",       "nausea",
    "dizziness", "fatigue",      "throat",    "earache",    "backache",
    "knee",      "ankle",        "wrist",     "shoulder",   "chest",
    "abdominal", "stomach",      "diarrhea",  "constipation", "urination",
    "burning",   "itching",      "swelling",  "wheezing",   "congestion",
    "sneezing",  "vomiting",     "bleeding",  "bruise",     "insomnia",
    "anxiety",   "depression",   "palpitations", "numbness", "tingling",
    "migraine",  "sinus",        "allergy",   "eczema",     "acne",
    "wart",      "mole",         "blister",   "sprain",     "fracture",
    "cramps",    "spasm",        "stiffness", "hip",        "neck",
    "foot",      "toe",          "finger",    "eye",        "vision",
    "hearing",   "tooth",        "jaw",       "gums",       "thyroid",
    "sugar",     "pressure",     "cholesterol", "weight",   "pregnancy",
    "menstrual", "discharge",    "hemorrhoids", "heartburn", "reflux",
    "bloating",  "gas",          "hernia",    "lump",       "cyst",
    "infection", "flu",          "cold",      "asthma",     "wound"};

std::string pad(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(width > static_cast<int>(s.size())
                         ? width - static_cast<int>(s.size())
                         : 0,
                     '0') +
         s;
}

std::string bank_word(int i) {
  const int n = static_cast<int>(kWordBank.size());
  if (i < n) return kWordBank[i];
  return kWordBank[i % n] + std::to_string(i / n);
}

void check_config(const WorldConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("world config: " + msg);
  };
  require(c.n_chief_complaints >= 1, "n_chief_complaints must be >= 1");
  require(c.n_conditions >= 1, "n_conditions must be >= 1");
  require(c.n_concepts >= 1, "n_concepts must be >= 1");
  require(c.conditions_per_cc >= 1, "conditions_per_cc must be >= 1");
  require(c.characteristic_concepts >= 1 &&
              c.characteristic_concepts <= c.n_concepts,
          "characteristic_concepts out of range");
  require(c.primary_diagnosis_min > 0.5 &&
              c.primary_diagnosis_max >= c.primary_diagnosis_min &&
              c.primary_diagnosis_max <= 1.0,
          "every condition needs a diagnosis emitted with probability > 0.5");
  require(c.n_medications >= 1 && c.n_labs >= 1 && c.n_imaging >= 1,
          "outcome vocabularies must be non-empty");
  require(c.healthy_min >= 0 && c.healthy_max <= 1 &&
              c.healthy_min <= c.healthy_max,
          "healthy mass range invalid");
  for (double p : {c.duration_fraction, c.severity_fraction,
                   c.emission_high_min, c.emission_high_max,
                   c.emission_background_max, c.absent_density,
                   c.absent_density_background, c.outcome_background_max,
                   c.second_cc_rate, c.followup_rate, c.text_confusion,
                   c.chronic_fraction, c.history_strength, c.off_cc_leak}) {
    require(p >= 0.0 && p <= 1.0, "probabilities must lie in [0,1]");
  }
  require(c.emission_high_min <= c.emission_high_max,
          "emission_high range invalid");
  require(c.max_prior_encounters >= 0, "max_prior_encounters must be >= 0");
}

}  // namespace

util::Json WorldConfig::to_json() const {
  return {{"n_chief_complaints", n_chief_complaints},
          {"n_conditions", n_conditions},
          {"n_concepts", n_concepts},
          {"duration_fraction", duration_fraction},
          {"severity_fraction", severity_fraction},
          {"conditions_per_cc", conditions_per_cc},
          {"characteristic_concepts", characteristic_concepts},
          {"emission_high_min", emission_high_min},
          {"emission_high_max", emission_high_max},
          {"emission_background_max", emission_background_max},
          {"absent_density", absent_density},
          {"absent_density_background", absent_density_background},
          {"secondary_diagnoses", secondary_diagnoses},
          {"primary_diagnosis_min", primary_diagnosis_min},
          {"primary_diagnosis_max", primary_diagnosis_max},
          {"n_background_diagnoses", n_background_diagnoses},
          {"outcome_background_max", outcome_background_max},
          {"n_medications", n_medications},
          {"n_labs", n_labs},
          {"n_imaging", n_imaging},
          {"healthy_min", healthy_min},
          {"healthy_max", healthy_max},
          {"off_cc_leak", off_cc_leak},
          {"second_cc_rate", second_cc_rate},
          {"followup_rate", followup_rate},
          {"text_confusion", text_confusion},
          {"chronic_fraction", chronic_fraction},
          {"history_strength", history_strength},
          {"max_prior_encounters", max_prior_encounters},
          {"female_only_concepts", female_only_concepts}};
}

WorldConfig WorldConfig::from_json(const util::Json& j) {
  WorldConfig c;
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  take("n_chief_complaints", c.n_chief_complaints);
  take("n_conditions", c.n_conditions);
  take("n_concepts", c.n_concepts);
  take("duration_fraction", c.duration_fraction);
  take("severity_fraction", c.severity_fraction);
  take("conditions_per_cc", c.conditions_per_cc);
  take("characteristic_concepts", c.characteristic_concepts);
  take("emission_high_min", c.emission_high_min);
  take("emission_high_max", c.emission_high_max);
  take("emission_background_max", c.emission_background_max);
  take("absent_density", c.absent_density);
  take("absent_density_background", c.absent_density_background);
  take("secondary_diagnoses", c.secondary_diagnoses);
  take("primary_diagnosis_min", c.primary_diagnosis_min);
  take("primary_diagnosis_max", c.primary_diagnosis_max);
  take("n_background_diagnoses", c.n_background_diagnoses);
  take("outcome_background_max", c.outcome_background_max);
  take("n_medications", c.n_medications);
  take("n_labs", c.n_labs);
  take("n_imaging", c.n_imaging);
  take("healthy_min", c.healthy_min);
  take("healthy_max", c.healthy_max);
  take("off_cc_leak", c.off_cc_leak);
  take("second_cc_rate", c.second_cc_rate);
  take("followup_rate", c.followup_rate);
  take("text_confusion", c.text_confusion);
  take("chronic_fraction", c.chronic_fraction);
  take("history_strength", c.history_strength);
  take("max_prior_encounters", c.max_prior_encounters);
  take("female_only_concepts", c.female_only_concepts);
  return c;
}

int WorldModel::cc_index(const std::string& cc) const {
  for (std::size_t i = 0; i < chief_complaints.size(); ++i) {
    if (chief_complaints[i].id == cc) return static_cast<int>(i);
  }
  throw NotFoundError("unknown chief complaint \"" + cc + "\"");
}

int WorldModel::base_index_of(const std::string& concept_id) const {
  auto it = concept_base.find(concept_id);
  if (it == concept_base.end()) {
    throw ValidationError("concept \"" + concept_id +
                          "\" is not part of the world");
  }
  return it->second;
}

void WorldModel::rebuild_index() {
  concept_base.clear();
  for (std::size_t i = 0; i < base_concepts.size(); ++i) {
    const BaseConcept& b = base_concepts[i];
    concept_base[b.id] = static_cast<int>(i);
    if (!b.duration_id.empty()) concept_base[b.duration_id] = static_cast<int>(i);
    if (!b.severity_id.empty()) concept_base[b.severity_id] = static_cast<int>(i);
  }
}

const std::vector<double>& WorldModel::prior(const CohortKey& key) const {
  return priors[cc_index(key.chief_complaint)][key.age_bin]
               [key.sex == Sex::kFemale ? 0 : 1];
}

double WorldModel::healthy_prior(const CohortKey& key) const {
  const auto& p = prior(key);
  return std::max(0.0, 1.0 - std::accumulate(p.begin(), p.end(), 0.0));
}

double WorldModel::emission(int k, int base, Sex sex) const {
  if (sex == Sex::kMale && base_concepts[base].female_only) return 0.0;
  if (k == static_cast<int>(conditions.size())) {
    return healthy_concept_emission[base];
  }
  return conditions[k].concept_emission[base];
}

const std::vector<double>& WorldModel::outcome_row(int k,
                                                   OutcomeKind kind) const {
  if (k < 0 || k == static_cast<int>(conditions.size())) {
    return healthy_outcome_emission[static_cast<int>(kind)];
  }
  return conditions[k].outcome_emission[static_cast<int>(kind)];
}

double WorldModel::implied_outcome_rate(const std::string& cc,
                                        OutcomeKind kind, int code) const {
  const double total_age =
      std::accumulate(age_bin_weights.begin(), age_bin_weights.end(), 0.0);
  const int K = static_cast<int>(conditions.size());
  double rate = 0.0;
  for (int a = 0; a < kNumAgeBins; ++a) {
    for (int s = 0; s < 2; ++s) {
      const double w = age_bin_weights[a] / total_age *
                       (s == 0 ? female_rate : 1.0 - female_rate);
      const CohortKey key{cc, a, s == 0 ? Sex::kFemale : Sex::kMale};
      const auto& p = prior(key);
      double r = healthy_prior(key) * outcome_row(K, kind)[code];
      for (int k = 0; k < K; ++k) r += p[k] * outcome_row(k, kind)[code];
      rate += w * r;
    }
  }
  return rate;
}

WorldModel build_world(std::uint64_t seed, const WorldConfig& config) {
  check_config(config);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x77u};
  std::mt19937_64 rng(seq);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto randint = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  WorldModel w;
  w.seed = seed;
  w.config = config;
  w.age_bin_weights = kAgeBinWeights;
  const int n_cc = config.n_chief_complaints;
  const int K = config.n_conditions;
  const int n_base = config.n_concepts;

  // Chief complaints and their keyword banks. Keywords are drawn from a
  // shuffled bank so complaints have disjoint vocabularies.
  std::vector<int> word_order(std::max<int>(kWordBank.size(), 3 * n_cc));
  std::iota(word_order.begin(), word_order.end(), 0);
  std::shuffle(word_order.begin(), word_order.end(), rng);
  for (int c = 0; c < n_cc; ++c) {
    ChiefComplaint cc;
    cc.id = "cc" + pad(c, 2);
    for (int k = 0; k < 3; ++k) cc.keywords.push_back(bank_word(word_order[3 * c + k]));
    cc.name = cc.keywords.front() + " problem";
    w.chief_complaints.push_back(std::move(cc));
    w.cc_weights.push_back(1.0 / std::pow(c + 1.0, 0.5));
  }

  // Findings and ordinal companions.
  std::vector<cms::Concept> concepts;
  for (int i = 0; i < n_base; ++i) {
    BaseConcept b;
    b.id = "f" + pad(i, 3);
    const std::string word = bank_word(i);
    cms::Concept c;
    c.id = b.id;
    c.canonical_name = word + " (" + b.id + ")";
    c.synonyms = {"U" + pad(1000000 + 3 * i, 7), "U" + pad(1000001 + 3 * i, 7)};
    c.stem = "Do you have any of the following?";
    c.patient_text = word;
    c.response_type = cms::ResponseType::kYesNo;
    c.note_section = (i % 10 == 9) ? cms::NoteSection::kPE : cms::NoteSection::kROS;
    c.response_evaluation = cms::ResponseEvaluation::kCategorical;
    const double u = uniform(0.0, 1.0);
    if (u < config.duration_fraction) {
      b.duration_id = b.id + "_duration";
      cms::Concept d;
      d.id = b.duration_id;
      d.canonical_name = "duration of " + word;
      d.synonyms = {"U" + pad(1000002 + 3 * i, 7)};
      d.patient_text = "How long have you had " + word + "?";
      d.response_type = cms::ResponseType::kDurationDropdown;
      d.note_section = cms::NoteSection::kHPI;
      d.response_evaluation = cms::ResponseEvaluation::kOrdinalDuration;
      concepts.push_back(std::move(d));
    } else if (u < config.duration_fraction + config.severity_fraction) {
      b.severity_id = b.id + "_severity";
      cms::Concept s;
      s.id = b.severity_id;
      s.canonical_name = "severity of " + word;
      s.synonyms = {"U" + pad(1000002 + 3 * i, 7)};
      s.patient_text = "How bad is your " + word + "?";
      s.post_text = "(0 = none, 10 = worst)";
      s.response_type = cms::ResponseType::kSeverityScale;
      s.note_section = cms::NoteSection::kHPI;
      s.response_evaluation = cms::ResponseEvaluation::kOrdinalSeverity;
      concepts.push_back(std::move(s));
    }
    concepts.push_back(std::move(c));
    w.base_concepts.push_back(std::move(b));
  }

  // Outcome vocabularies.
  auto& dx_vocab = w.outcome_vocab[static_cast<int>(OutcomeKind::kDiagnosis)];
  for (int k = 0; k < K; ++k) dx_vocab.push_back("dx_c" + pad(k, 3));
  for (int j = 0; j < config.n_background_diagnoses; ++j) {
    dx_vocab.push_back("dx_s" + pad(j, 3));
  }
  for (int j = 0; j < config.n_medications; ++j) {
    w.outcome_vocab[static_cast<int>(OutcomeKind::kMedication)].push_back(
        "med_" + pad(j, 3));
  }
  for (int j = 0; j < config.n_labs; ++j) {
    w.outcome_vocab[static_cast<int>(OutcomeKind::kLab)].push_back("lab_" +
                                                                   pad(j, 3));
  }
  for (int j = 0; j < config.n_imaging; ++j) {
    w.outcome_vocab[static_cast<int>(OutcomeKind::kImaging)].push_back(
        "img_" + pad(j, 3));
  }
  w.history_vocab[0] = dx_vocab;
  w.history_vocab[1] = w.outcome_vocab[1];
  w.history_vocab[2] = w.outcome_vocab[2];
  w.history_vocab[2].insert(w.history_vocab[2].end(), w.outcome_vocab[3].begin(),
                            w.outcome_vocab[3].end());
  for (const auto& cc : w.chief_complaints) w.history_vocab[3].push_back(cc.id);

  // Healthy background.
  w.healthy_concept_emission.resize(n_base);
  for (double& e : w.healthy_concept_emission) {
    e = uniform(0.0, config.emission_background_max);
  }
  for (int kind = 0; kind < kNumOutcomeKinds; ++kind) {
    auto& row = w.healthy_outcome_emission[kind];
    row.resize(w.outcome_vocab[kind].size());
    for (double& p : row) p = uniform(0.0, config.outcome_background_max);
  }

  // Conditions.
  std::vector<int> base_order(n_base);
  std::iota(base_order.begin(), base_order.end(), 0);
  for (int k = 0; k < K; ++k) {
    Condition cond;
    cond.id = "k" + pad(k, 3);
    cond.chronic = uniform(0.0, 1.0) < config.chronic_fraction;
    cond.age_peak = randint(0, kNumAgeBins - 1);
    cond.age_width = uniform(1.5, 5.0);
    cond.female_share = uniform(0.2, 0.8);
    cond.concept_emission.resize(n_base);
    for (int i = 0; i < n_base; ++i) {
      cond.concept_emission[i] = w.healthy_concept_emission[i] +
                                 uniform(0.0, config.emission_background_max);
    }
    std::shuffle(base_order.begin(), base_order.end(), rng);
    for (int j = 0; j < config.characteristic_concepts; ++j) {
      const int i = base_order[j];
      cond.characteristic.push_back(i);
      cond.concept_emission[i] =
          uniform(config.emission_high_min, config.emission_high_max);
    }
    for (int kind = 0; kind < kNumOutcomeKinds; ++kind) {
      cond.outcome_emission[kind] = w.healthy_outcome_emission[kind];
    }
    auto& dx = cond.outcome_emission[static_cast<int>(OutcomeKind::kDiagnosis)];
    cond.primary_diagnosis = k;
    dx[k] = uniform(config.primary_diagnosis_min, config.primary_diagnosis_max);
    for (int j = 0; j < config.secondary_diagnoses &&
                    config.n_background_diagnoses > 0;
         ++j) {
      dx[K + randint(0, config.n_background_diagnoses - 1)] = uniform(0.1, 0.4);
    }
    auto pick = [&](OutcomeKind kind, int lo, int hi, double plo, double phi) {
      auto& row = cond.outcome_emission[static_cast<int>(kind)];
      const int n = randint(lo, hi);
      for (int j = 0; j < n; ++j) {
        row[randint(0, static_cast<int>(row.size()) - 1)] = uniform(plo, phi);
      }
    };
    pick(OutcomeKind::kMedication, 1, 2, 0.3, 0.8);
    pick(OutcomeKind::kLab, 1, 2, 0.3, 0.8);
    pick(OutcomeKind::kImaging, 0, 1, 0.3, 0.7);
    w.conditions.push_back(std::move(cond));
  }

  // Female-only findings: characteristic findings of the most female-skewed
  // conditions.
  {
    std::vector<int> by_share(K);
    std::iota(by_share.begin(), by_share.end(), 0);
    std::stable_sort(by_share.begin(), by_share.end(), [&](int a, int b) {
      return w.conditions[a].female_share > w.conditions[b].female_share;
    });
    int marked = 0;
    for (int k : by_share) {
      if (marked >= config.female_only_concepts) break;
      const int i = w.conditions[k].characteristic.front();
      if (!w.base_concepts[i].female_only) {
        w.base_concepts[i].female_only = true;
        ++marked;
      }
    }
  }

  // Chief complaint -> conditions, with every condition reachable.
  std::vector<std::vector<std::pair<int, double>>> cc_conditions(n_cc);
  std::vector<int> cond_order(K);
  std::iota(cond_order.begin(), cond_order.end(), 0);
  std::shuffle(cond_order.begin(), cond_order.end(), rng);
  for (int k = 0; k < K; ++k) {
    cc_conditions[k % n_cc].push_back({cond_order[k], uniform(0.2, 1.0)});
  }
  for (int c = 0; c < n_cc; ++c) {
    while (static_cast<int>(cc_conditions[c].size()) <
           std::min(config.conditions_per_cc, K)) {
      const int k = randint(0, K - 1);
      const bool have = std::any_of(cc_conditions[c].begin(),
                                    cc_conditions[c].end(),
                                    [&](const auto& p) { return p.first == k; });
      if (!have) cc_conditions[c].push_back({k, uniform(0.2, 1.0)});
    }
  }

  w.relevant.assign(n_cc, std::vector<char>(n_base, 0));
  for (int c = 0; c < n_cc; ++c) {
    for (const auto& [k, wt] : cc_conditions[c]) {
      for (int i : w.conditions[k].characteristic) w.relevant[c][i] = 1;
    }
  }
  for (int i = 0; i < n_base; ++i) {
    bool any = false;
    for (int c = 0; c < n_cc; ++c) any = any || w.relevant[c][i];
    if (any) {
      cms::Concept* c = nullptr;
      for (auto& cc : concepts) {
        if (cc.id == w.base_concepts[i].id) c = &cc;
      }
      if (c != nullptr && c->note_section == cms::NoteSection::kROS) {
        c->note_section = cms::NoteSection::kHPI;
      }
    }
  }

  // Cohort priors.
  w.priors.resize(n_cc);
  for (int c = 0; c < n_cc; ++c) {
    std::vector<double> base_weight(K, 0.0);
    for (int k = 0; k < K; ++k) base_weight[k] = config.off_cc_leak * uniform(0.0, 1.0);
    for (const auto& [k, wt] : cc_conditions[c]) base_weight[k] = wt;
    for (int a = 0; a < kNumAgeBins; ++a) {
      for (int s = 0; s < 2; ++s) {
        std::vector<double> p(K);
        for (int k = 0; k < K; ++k) {
          const Condition& cond = w.conditions[k];
          const double d = (a - cond.age_peak) / cond.age_width;
          const double sex_factor =
              s == 0 ? cond.female_share : 1.0 - cond.female_share;
          p[k] = base_weight[k] * std::exp(-0.5 * d * d) * sex_factor;
        }
        const double total = std::accumulate(p.begin(), p.end(), 0.0);
        const double healthy = uniform(config.healthy_min, config.healthy_max);
        for (double& v : p) v = total > 0 ? v / total * (1.0 - healthy) : 0.0;
        w.priors[c][a][s] = std::move(p);
      }
    }
  }

  w.catalog = cms::ConceptCatalog::from_concepts(
      "world-" + std::to_string(seed), std::move(concepts));
  w.rebuild_index();
  return w;
}

util::Json WorldModel::to_json() const {
  util::Json j;
  j["format"] = "triage-world";
  j["format_version"] = 1;
  j["seed"] = seed;
  j["config"] = config.to_json();
  j["catalog"] = catalog.to_json();
  util::Json ccs = util::Json::array();
  for (const auto& cc : chief_complaints) {
    ccs.push_back({{"id", cc.id}, {"name", cc.name}, {"keywords", cc.keywords}});
  }
  j["chief_complaints"] = std::move(ccs);
  util::Json conds = util::Json::array();
  for (const auto& c : conditions) {
    util::Json oc = util::Json::array();
    for (const auto& row : c.outcome_emission) oc.push_back(row);
    conds.push_back({{"id", c.id},
                     {"chronic", c.chronic},
                     {"age_peak", c.age_peak},
                     {"age_width", c.age_width},
                     {"female_share", c.female_share},
                     {"characteristic", c.characteristic},
                     {"concept_emission", c.concept_emission},
                     {"outcome_emission", std::move(oc)},
                     {"primary_diagnosis", c.primary_diagnosis}});
  }
  j["conditions"] = std::move(conds);
  util::Json bases = util::Json::array();
  for (const auto& b : base_concepts) {
    bases.push_back({{"id", b.id},
                     {"duration_id", b.duration_id},
                     {"severity_id", b.severity_id},
                     {"female_only", b.female_only}});
  }
  j["base_concepts"] = std::move(bases);
  j["outcome_vocab"] = outcome_vocab;
  j["history_vocab"] = history_vocab;
  j["healthy_concept_emission"] = healthy_concept_emission;
  j["healthy_outcome_emission"] = healthy_outcome_emission;
  util::Json pri = util::Json::array();
  for (const auto& per_cc : priors) {
    util::Json by_age = util::Json::array();
    for (const auto& by_sex : per_cc) {
      by_age.push_back({by_sex[0], by_sex[1]});
    }
    pri.push_back(std::move(by_age));
  }
  j["priors"] = std::move(pri);
  util::Json rel = util::Json::array();
  for (const auto& r : relevant) {
    rel.push_back(std::vector<int>(r.begin(), r.end()));
  }
  j["relevant"] = std::move(rel);
  j["age_bin_weights"] = age_bin_weights;
  j["female_rate"] = female_rate;
  j["cc_weights"] = cc_weights;
  return j;
}

WorldModel WorldModel::from_json(const util::Json& j) {
  if (j.value("format", "") != "triage-world") {
    throw SchemaError("not a world file");
  }
  if (j.value("format_version", 0) != 1) {
    throw IncompatibleVersionError("unsupported world format version");
  }
  WorldModel w;
  w.seed = j.at("seed").get<std::uint64_t>();
  w.config = WorldConfig::from_json(j.at("config"));
  w.catalog = cms::ConceptCatalog::from_json(j.at("catalog"), "world catalog");
  for (const auto& cc : j.at("chief_complaints")) {
    w.chief_complaints.push_back(
        {cc.at("id").get<std::string>(), cc.at("name").get<std::string>(),
         cc.at("keywords").get<std::vector<std::string>>()});
  }
  for (const auto& c : j.at("conditions")) {
    Condition cond;
    cond.id = c.at("id").get<std::string>();
    cond.chronic = c.at("chronic").get<bool>();
    cond.age_peak = c.at("age_peak").get<int>();
    cond.age_width = c.at("age_width").get<double>();
    cond.female_share = c.at("female_share").get<double>();
    cond.characteristic = c.at("characteristic").get<std::vector<int>>();
    cond.concept_emission = c.at("concept_emission").get<std::vector<double>>();
    for (int k = 0; k < kNumOutcomeKinds; ++k) {
      cond.outcome_emission[k] =
          c.at("outcome_emission")[k].get<std::vector<double>>();
    }
    cond.primary_diagnosis = c.at("primary_diagnosis").get<int>();
    w.conditions.push_back(std::move(cond));
  }
  for (const auto& b : j.at("base_concepts")) {
    w.base_concepts.push_back({b.at("id").get<std::string>(),
                               b.at("duration_id").get<std::string>(),
                               b.at("severity_id").get<std::string>(),
                               b.at("female_only").get<bool>()});
  }
  w.outcome_vocab = j.at("outcome_vocab").get<decltype(w.outcome_vocab)>();
  w.history_vocab = j.at("history_vocab").get<decltype(w.history_vocab)>();
  w.healthy_concept_emission =
      j.at("healthy_concept_emission").get<std::vector<double>>();
  w.healthy_outcome_emission =
      j.at("healthy_outcome_emission").get<decltype(w.healthy_outcome_emission)>();
  for (const auto& per_cc : j.at("priors")) {
    std::array<std::array<std::vector<double>, 2>, kNumAgeBins> by_age;
    for (int a = 0; a < kNumAgeBins; ++a) {
      by_age[a][0] = per_cc[a][0].get<std::vector<double>>();
      by_age[a][1] = per_cc[a][1].get<std::vector<double>>();
    }
    w.priors.push_back(std::move(by_age));
  }
  for (const auto& r : j.at("relevant")) {
    auto v = r.get<std::vector<int>>();
    w.relevant.emplace_back(v.begin(), v.end());
  }
  w.age_bin_weights = j.at("age_bin_weights").get<std::vector<double>>();
  w.female_rate = j.at("female_rate").get<double>();
  w.cc_weights = j.at("cc_weights").get<std::vector<double>>();
  w.rebuild_index();
  return w;
}

util::Json generate_kb(const WorldModel& world) {
  util::Json prerequisites = util::Json::array();
  util::Json inference = util::Json::array();
  util::Json blocked = util::Json::array();
  for (const BaseConcept& b : world.base_concepts) {
    for (const std::string* comp : {&b.duration_id, &b.severity_id}) {
      if (comp->empty()) continue;
      prerequisites.push_back(
          {{"target", *comp}, {"prerequisite", b.id}, {"ask_prereq_first", true}});
      inference.push_back(
          {{"id", "present_" + *comp},
           {"if", util::Json::array({{{"concept", *comp}, {"value", "present"}}})},
           {"then", util::Json::array({{{"concept", b.id}, {"value", "certain"}}})}});
      if (b.female_only) blocked.push_back(*comp);
    }
    if (b.female_only) blocked.push_back(b.id);
  }
  util::Json fixers = util::Json::array();
  if (!blocked.empty()) {
    fixers.push_back({{"id", "female_only_findings"},
                      {"when", {{"sex", "male"}}},
                      {"block", blocked}});
  }

  // Scripted HPI: the two strongest findings of the complaint's most likely
  // condition, the duration of the first when it is present, and one
  // female-only finding behind a sex branch.
  util::Json scripted = util::Json::object();
  for (std::size_t c = 0; c < world.chief_complaints.size(); ++c) {
    const auto& pri = world.priors[c][5][0];
    const int top = static_cast<int>(
        std::max_element(pri.begin(), pri.end()) - pri.begin());
    const Condition& cond = world.conditions[top];
    util::Json steps = util::Json::array();
    for (std::size_t j = 0; j < cond.characteristic.size() && j < 2; ++j) {
      const BaseConcept& b = world.base_concepts[cond.characteristic[j]];
      if (b.female_only) {
        steps.push_back({{"concept", b.id}, {"when", {{"sex", "female"}}}});
      } else {
        steps.push_back(b.id);
      }
      if (j == 0 && !b.duration_id.empty()) {
        steps.push_back(
            {{"concept", b.duration_id},
             {"when",
              {{"asserted",
                util::Json::array({{{"concept", b.id}, {"value", "certain"}}})}}}});
      }
    }
    scripted[world.chief_complaints[c].id] = std::move(steps);
  }
  return {{"prerequisites", std::move(prerequisites)},
          {"fixers", std::move(fixers)},
          {"inference_rules", std::move(inference)},
          {"scripted_hpi", std::move(scripted)}};
}

}  // namespace triage::datagen

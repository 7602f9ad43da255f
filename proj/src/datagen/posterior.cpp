#include <cmath>
#include <limits>

#include "triage/datagen/world.hpp"
#include "triage/error.hpp"

namespace triage::datagen {

namespace {

enum class Evidence { kUnknown, kPresent, kAbsent, kConflict };

Evidence merge(Evidence current, Evidence incoming) {
  if (current == Evidence::kUnknown || current == incoming) return incoming;
  return Evidence::kConflict;
}

}  // namespace

Posterior true_posterior(const WorldModel& world, const CohortKey& cohort,
                         std::span<const cms::Assertion> asserted) {
  const int K = static_cast<int>(world.conditions.size());
  const std::vector<double>& prior = world.prior(cohort);

  // Collapse assertions to per-finding evidence; ordinal companions imply
  // presence of their base finding.
  std::vector<Evidence> evidence(world.base_concepts.size(), Evidence::kUnknown);
  for (const cms::Assertion& a : asserted) {
    const int base = world.base_index_of(a.concept_id);
    if (!cms::is_informative(a.value)) continue;
    evidence[base] = merge(evidence[base], cms::is_present(a.value)
                                               ? Evidence::kPresent
                                               : Evidence::kAbsent);
  }

  std::vector<double> log_weight(K + 1);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= K; ++k) {
    const double pk = k < K ? prior[k] : world.healthy_prior(cohort);
    double lw = std::log(pk);
    for (std::size_t i = 0; i < evidence.size() && std::isfinite(lw); ++i) {
      if (evidence[i] == Evidence::kUnknown) continue;
      if (evidence[i] == Evidence::kConflict) {
        lw = -std::numeric_limits<double>::infinity();
        break;
      }
      const double e = world.emission(k, static_cast<int>(i), cohort.sex);
      lw += std::log(evidence[i] == Evidence::kPresent ? e : 1.0 - e);
    }
    log_weight[k] = lw;
    max_log = std::max(max_log, lw);
  }

  Posterior out;
  out.conditions.resize(K + 1);
  if (!std::isfinite(max_log)) {
    out.degenerate = true;
    for (int k = 0; k < K; ++k) out.conditions[k] = prior[k];
    out.conditions[K] = world.healthy_prior(cohort);
  } else {
    double total = 0.0;
    for (int k = 0; k <= K; ++k) {
      out.conditions[k] = std::exp(log_weight[k] - max_log);
      total += out.conditions[k];
    }
    for (double& p : out.conditions) p /= total;
  }

  const auto dx = static_cast<int>(OutcomeKind::kDiagnosis);
  out.diagnoses.assign(world.outcome_vocab[dx].size(), 0.0);
  for (int k = 0; k <= K; ++k) {
    const auto& row = world.outcome_row(k, OutcomeKind::kDiagnosis);
    for (std::size_t d = 0; d < row.size(); ++d) {
      out.diagnoses[d] += out.conditions[k] * row[d];
    }
  }
  return out;
}

}  // namespace triage::datagen

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "triage/neural/assessment.hpp"

namespace triage::neural {

inline const std::vector<double>& default_weight_candidates() {
  static const std::vector<double> kValues{0.5, 0.9, 1.0, 2.0, 3.0};
  return kValues;
}

// `n` distinct tuples drawn uniformly from candidates^4, in draw order.
std::vector<LossWeights> sample_weight_tuples(const std::vector<double>& candidates,
                                              int n, std::uint64_t seed);

using HeadTable = std::vector<std::array<double, kNumHeads>>;
using RankTable = std::vector<std::array<int, kNumHeads>>;

// Per head, rank = 1 + number of tuples with strictly lower PR-AUC, so the
// best tuple has the highest rank and equal scores share a rank.
RankTable rank_trials(const HeadTable& pr_auc);

// Index of the tuple whose worst head rank is highest; earlier tuples win
// ties. Requires a non-empty table.
std::size_t select_max_min_rank(const HeadTable& pr_auc);

struct SearchReport {
  std::vector<LossWeights> tuples;
  HeadTable pr_auc;
  RankTable ranks;
  std::size_t chosen = 0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;

  const LossWeights& best() const { return tuples.at(chosen); }
  util::Json to_json() const;
};

// Trains one model per sampled tuple on a `sample_frac` subsample of `train`
// and scores each head's PR-AUC on `eval`.
SearchReport loss_weight_search(const AssessmentSchema& schema,
                                std::span<const AssessmentExample> train,
                                std::span<const AssessmentExample> eval,
                                const AssessmentConfig& config,
                                const std::vector<double>& candidates,
                                int n_trials = 10, double sample_frac = 0.05,
                                std::uint64_t seed = 0);

}  // namespace triage::neural

#include "triage/neural/loss_weight_search.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "triage/error.hpp"

namespace triage::neural {

std::vector<LossWeights> sample_weight_tuples(const std::vector<double>& candidates,
                                              int n, std::uint64_t seed) {
  const std::size_t k = candidates.size();
  const double grid = std::pow(static_cast<double>(k), kNumHeads);
  if (k == 0 || n < 0 || static_cast<double>(n) > grid) {
    throw ConfigError("cannot draw " + std::to_string(n) + " distinct weight tuples");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::set<std::array<std::size_t, kNumHeads>> seen;
  std::vector<LossWeights> out;
  while (static_cast<int>(out.size()) < n) {
    std::array<std::size_t, kNumHeads> idx{};
    for (auto& i : idx) i = pick(rng);
    if (!seen.insert(idx).second) continue;
    LossWeights w{};
    for (int h = 0; h < kNumHeads; ++h) w[h] = candidates[idx[h]];
    out.push_back(w);
  }
  return out;
}

RankTable rank_trials(const HeadTable& pr_auc) {
  RankTable ranks(pr_auc.size());
  for (std::size_t i = 0; i < pr_auc.size(); ++i) {
    for (int h = 0; h < kNumHeads; ++h) {
      int worse = 0;
      for (const auto& other : pr_auc) {
        if (other[h] < pr_auc[i][h]) ++worse;
      }
      ranks[i][h] = 1 + worse;
    }
  }
  return ranks;
}

std::size_t select_max_min_rank(const HeadTable& pr_auc) {
  if (pr_auc.empty()) throw ValidationError("no trials to select from");
  const RankTable ranks = rank_trials(pr_auc);
  std::size_t best = 0;
  int best_min = -1;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const int worst = *std::min_element(ranks[i].begin(), ranks[i].end());
    if (worst > best_min) {
      best_min = worst;
      best = i;
    }
  }
  return best;
}

util::Json SearchReport::to_json() const {
  util::Json trials = util::Json::array();
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    trials.push_back({{"weights", tuples[i]}, {"pr_auc", pr_auc[i]}, {"ranks", ranks[i]}});
  }
  return {{"trials", trials},
          {"chosen", chosen},
          {"chosen_weights", tuples.empty() ? util::Json(nullptr) : util::Json(best())},
          {"n_train", n_train},
          {"n_eval", n_eval}};
}

SearchReport loss_weight_search(const AssessmentSchema& schema,
                                std::span<const AssessmentExample> train,
                                std::span<const AssessmentExample> eval,
                                const AssessmentConfig& config,
                                const std::vector<double>& candidates, int n_trials,
                                double sample_frac, std::uint64_t seed) {
  if (!(sample_frac > 0.0 && sample_frac <= 1.0)) {
    throw ConfigError("sample fraction must be in (0, 1]");
  }
  SearchReport report;
  report.tuples = sample_weight_tuples(candidates, n_trials, seed);

  // Subsample without replacement, keeping the original order.
  const std::size_t n_sub = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(sample_frac * static_cast<double>(train.size()))));
  std::vector<std::size_t> idx(train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  for (std::size_t i = 0; i < std::min(n_sub, idx.size()); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(std::min(n_sub, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<AssessmentExample> subsample;
  subsample.reserve(idx.size());
  for (std::size_t i : idx) subsample.push_back(train[i]);
  report.n_train = subsample.size();
  report.n_eval = eval.size();

  for (const LossWeights& w : report.tuples) {
    AssessmentConfig trial = config;
    trial.loss_weights = w;
    const AssessmentModel model = train_assessment(schema, subsample, trial);
    report.pr_auc.push_back(head_pr_auc(model, eval));
  }
  report.ranks = rank_trials(report.pr_auc);
  report.chosen = select_max_min_rank(report.pr_auc);
  return report;
}

}  // namespace triage::neural

#include "triage/stats/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "triage/error.hpp"

namespace triage::stats {

namespace {

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return idx;
}

void check_aligned(std::span<const double> scores, std::span<const char> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length");
  }
}

}  // namespace

double average_precision(std::span<const double> scores,
                         std::span<const char> labels) {
  check_aligned(scores, labels);
  const auto positives = std::count_if(labels.begin(), labels.end(),
                                       [](char c) { return c != 0; });
  if (positives == 0) {
    throw UndefinedMetricError("PR-AUC is undefined without positive labels");
  }
  const auto idx = order_by_score_desc(scores);
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    // Consume a whole tie group before evaluating the threshold.
    const double s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) {
      (labels[idx[i]] ? tp : fp) += 1.0;
      ++i;
    }
    const double recall = tp / static_cast<double>(positives);
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double roc_auc(std::span<const double> scores, std::span<const char> labels) {
  check_aligned(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0;
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    // Ranks i+1 .. j share their mean.
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t m = i; m < j; ++m) {
      if (labels[idx[m]]) {
        positives += 1.0;
        rank_sum += mean_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw UndefinedMetricError(
        "ROC-AUC needs at least one positive and one negative label");
  }
  const double u = rank_sum - positives * (positives + 1.0) / 2.0;
  return u / (positives * negatives);
}

std::optional<double> ndcg(std::span<const double> scores,
                           std::span<const char> labels,
                           std::optional<int> cutoff) {
  check_aligned(scores, labels);
  const auto positives = static_cast<std::size_t>(std::count_if(
      labels.begin(), labels.end(), [](char c) { return c != 0; }));
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return (labels[a] != 0) < (labels[b] != 0);
  });
  std::size_t depth = idx.size();
  if (cutoff) depth = std::min(depth, static_cast<std::size_t>(std::max(*cutoff, 0)));
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (labels[idx[r]]) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < std::min(depth, positives); ++r) {
    ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  if (ideal == 0.0) return std::nullopt;
  return dcg / ideal;
}

RankMetrics rank_metrics(const ScoreMatrix& scores, const TruthMatrix& truth,
                         const MetricOptions& options) {
  if (scores.size() != truth.size()) {
    throw ShapeError("scores and truth have different instance counts");
  }
  std::vector<double> flat_scores;
  std::vector<char> flat_truth;
  double ndcg_sum = 0.0;
  std::size_t ndcg_n = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != truth[i].size()) {
      throw ShapeError("instance " + std::to_string(i) +
                       ": scores and truth have different label counts");
    }
    flat_scores.insert(flat_scores.end(), scores[i].begin(), scores[i].end());
    flat_truth.insert(flat_truth.end(), truth[i].begin(), truth[i].end());
    if (auto g = ndcg(scores[i], truth[i], options.ndcg_cutoff)) {
      ndcg_sum += *g;
      ++ndcg_n;
    }
  }
  RankMetrics m;
  m.micro_pr_auc = average_precision(flat_scores, flat_truth);
  m.micro_roc_auc = roc_auc(flat_scores, flat_truth);
  m.ndcg = ndcg_n == 0 ? 0.0 : ndcg_sum / static_cast<double>(ndcg_n);
  return m;
}

}  // namespace triage::stats

#pragma once

#include <optional>
#include <span>
#include <vector>

namespace triage::stats {

struct RankMetrics {
  double micro_pr_auc = 0.0;
  double micro_roc_auc = 0.0;
  double ndcg = 0.0;
};

struct MetricOptions {
  // Full-length ranking when unset.
  std::optional<int> ndcg_cutoff;
};

// Row-major (instance x label) matrices.
using ScoreMatrix = std::vector<std::vector<double>>;
using TruthMatrix = std::vector<std::vector<char>>;

// Micro metrics pool every (instance, label) cell. nDCG is computed per
// instance with binary gains and averaged over instances that have at least
// one positive label. Throws ShapeError on misaligned inputs and
// UndefinedMetricError when there is no positive (or no negative) cell.
RankMetrics rank_metrics(const ScoreMatrix& scores, const TruthMatrix& truth,
                         const MetricOptions& options = {});

// Step-wise precision/recall integral (average precision) over distinct
// score thresholds.
double average_precision(std::span<const double> scores,
                         std::span<const char> labels);

// Mann-Whitney U / (P * N); tied scores count one half.
double roc_auc(std::span<const double> scores, std::span<const char> labels);

// Binary-gain nDCG for one ranking; ties are ordered worst case (negatives
// first). Returns nullopt when the instance has no positive label.
std::optional<double> ndcg(std::span<const double> scores,
                           std::span<const char> labels,
                           std::optional<int> cutoff = std::nullopt);

}  // namespace triage::stats

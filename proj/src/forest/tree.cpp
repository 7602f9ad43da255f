#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <thread>

#include "triage/error.hpp"
#include "triage/forest/forest.hpp"
#include "triage/util/log.hpp"

namespace triage::forest {

namespace {

constexpr double kMinGain = 1e-12;

struct TrainData {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::size_t n_targets = 0;
  std::vector<std::vector<double>> columns;  // columns[f][row]
  const std::vector<std::vector<int>>* positives = nullptr;
};

// Sum over targets of c * (n - c) / n: the Gini impurity of a node times n/2.
double scaled_impurity(const std::vector<int>& counts,
                       const std::vector<int>& active, double n) {
  if (n <= 0.0) return 0.0;
  double s = 0.0;
  for (int t : active) {
    const double c = counts[t];
    s += c * (n - c);
  }
  return s / n;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // scaled by n/2
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainData& data, const ForestParams& params,
              std::mt19937_64& rng)
      : data_(data), params_(params), rng_(rng) {
    feature_pool_.resize(data.n_features);
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    const double k = params.feature_fraction * static_cast<double>(data.n_features);
    n_sampled_ = std::clamp<std::size_t>(static_cast<std::size_t>(k), 1,
                                         std::max<std::size_t>(data.n_features, 1));
  }

  DecisionTree build(std::vector<int> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<int> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const double n = static_cast<double>(rows.size());

    std::vector<int> counts(data_.n_targets, 0);
    for (int r : rows) {
      for (int t : (*data_.positives)[r]) ++counts[t];
    }
    std::vector<int> active;
    for (std::size_t t = 0; t < counts.size(); ++t) {
      if (counts[t] > 0 && counts[t] < static_cast<int>(rows.size())) {
        active.push_back(static_cast<int>(t));
      }
    }

    Split split;
    if (depth < params_.max_depth && !active.empty() &&
        static_cast<int>(rows.size()) >= params_.min_samples_split) {
      split = best_split(rows, counts, active);
    }
    if (split.feature < 0) {
      TreeNode& leaf = tree_.nodes[id];
      leaf.value.resize(data_.n_targets);
      for (std::size_t t = 0; t < counts.size(); ++t) leaf.value[t] = counts[t] / n;
      return id;
    }

    std::vector<int> left_rows;
    std::vector<int> right_rows;
    const auto& col = data_.columns[split.feature];
    for (int r : rows) {
      (col[r] <= split.threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    {
      TreeNode& node = tree_.nodes[id];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.gain = 2.0 * split.gain / n;
    }
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  Split best_split(const std::vector<int>& rows, const std::vector<int>& counts,
                   const std::vector<int>& active) {
    // Partial Fisher-Yates draw of the node's feature sample.
    for (std::size_t i = 0; i < n_sampled_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, feature_pool_.size() - 1);
      std::swap(feature_pool_[i], feature_pool_[pick(rng_)]);
    }
    const double n = static_cast<double>(rows.size());
    const double parent = scaled_impurity(counts, active, n);

    Split best;
    std::vector<std::pair<double, int>> order(rows.size());
    std::vector<int> left_counts(data_.n_targets, 0);
    std::vector<int> right_counts(data_.n_targets, 0);
    for (std::size_t s = 0; s < n_sampled_; ++s) {
      const int f = feature_pool_[s];
      const auto& col = data_.columns[f];
      for (std::size_t i = 0; i < rows.size(); ++i) order[i] = {col[rows[i]], rows[i]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;

      for (int t : active) left_counts[t] = 0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        for (int t : (*data_.positives)[order[i].second]) ++left_counts[t];
        if (order[i].first == order[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        for (int t : active) right_counts[t] = counts[t] - left_counts[t];
        const double gain = parent - scaled_impurity(left_counts, active, nl) -
                            scaled_impurity(right_counts, active, nr);
        // Strict improvement keeps the lower threshold on ties.
        if (gain > best.gain + kMinGain) {
          best.feature = f;
          best.threshold = 0.5 * (order[i].first + order[i + 1].first);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const TrainData& data_;
  const ForestParams& params_;
  std::mt19937_64& rng_;
  std::vector<int> feature_pool_;
  std::size_t n_sampled_ = 1;
  DecisionTree tree_;
};

}  // namespace

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i];
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[i].is_leaf()) {
      stack.push_back({nodes[i].left, d + 1});
      stack.push_back({nodes[i].right, d + 1});
    }
  }
  return deepest;
}

std::vector<DecisionTree> train_trees(const std::vector<std::vector<double>>& X,
                                      const std::vector<std::vector<int>>& Y,
                                      std::size_t n_targets,
                                      const ForestParams& params) {
  if (X.size() < 2) throw ValidationError("forest training needs >= 2 rows");
  if (Y.size() != X.size()) throw ShapeError("X and Y row counts differ");
  if (params.n_trees < 1 || params.max_depth < 0 ||
      !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0)) {
    throw ConfigError("invalid forest parameters");
  }
  TrainData data;
  data.n_rows = X.size();
  data.n_features = X.front().size();
  data.n_targets = n_targets;
  data.positives = &Y;
  if (data.n_features == 0) throw ShapeError("forest training needs >= 1 feature");
  std::vector<int> pos_count(n_targets, 0);
  for (const auto& ys : Y) {
    for (int t : ys) {
      if (t < 0 || static_cast<std::size_t>(t) >= n_targets) {
        throw ShapeError("target index out of range");
      }
      ++pos_count[t];
    }
  }
  const bool any_mixed = std::any_of(pos_count.begin(), pos_count.end(), [&](int c) {
    return c > 0 && c < static_cast<int>(X.size());
  });
  if (!any_mixed) {
    throw ValidationError("no target has both classes present");
  }
  data.columns.assign(data.n_features, std::vector<double>(data.n_rows));
  bool all_constant = true;
  for (std::size_t r = 0; r < data.n_rows; ++r) {
    if (X[r].size() != data.n_features) throw ShapeError("ragged feature rows");
    for (std::size_t f = 0; f < data.n_features; ++f) {
      data.columns[f][r] = X[r][f];
      if (X[r][f] != X[0][f]) all_constant = false;
    }
  }
  if (all_constant) util::log_warn("all features constant; trees are single leaves");

  std::vector<DecisionTree> trees(params.n_trees);
  auto train_one = [&](int i) {
    std::seed_seq seq{static_cast<std::uint64_t>(params.seed),
                      static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::vector<int> rows(data.n_rows);
    if (params.bootstrap) {
      std::uniform_int_distribution<int> draw(0, static_cast<int>(data.n_rows) - 1);
      for (auto& r : rows) r = draw(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(data, params, rng);
    trees[i] = builder.build(std::move(rows));
  };
  const int threads = std::max(1, std::min(params.threads, params.n_trees));
  if (threads == 1) {
    for (int i = 0; i < params.n_trees; ++i) train_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < params.n_trees; i = next++) train_one(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  return trees;
}

}  // namespace triage::forest

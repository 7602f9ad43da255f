#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "triage/datagen/encounter.hpp"
#include "triage/forest/features.hpp"
#include "triage/util/json_io.hpp"

namespace triage::forest {

// Internal nodes send x[feature] <= threshold left. Leaves have feature -1
// and carry one P[target = 1] per target.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Impurity decrease of the chosen split (internal nodes only).
  double gain = 0.0;
  std::vector<double> value;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const;
  int depth() const;
};

struct ForestParams {
  int n_trees = 100;
  double feature_fraction = 0.10;  // sampled afresh at every node
  int max_depth = 15;
  int min_samples_split = 2;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  int threads = 1;

  util::Json to_json() const;
  static ForestParams from_json(const util::Json& j);
};

struct CohortForest {
  CohortKey cohort;
  FeatureSchema schema;
  std::vector<std::string> targets;
  ForestParams params;
  int history_days = 180;
  std::vector<DecisionTree> trees;

  // Mean of the trees' leaf vectors. Throws ShapeError on schema mismatch.
  std::vector<double> predict_proba(std::span<const double> x) const;
  // Windows the history to history_days before encoding.
  EncodedRow encode(int age_years, std::span<const cms::Assertion> assertions,
                    const History& history) const;

  util::Json to_json() const;
  static CohortForest from_json(const util::Json& j);
  void save(const std::filesystem::path& path) const;
  static CohortForest load(const std::filesystem::path& path);
};

inline constexpr int kForestFormatVersion = 1;

// Trains on dense rows X with sparse positive target lists Y. Requires at
// least two rows and one target with both classes present (ValidationError).
std::vector<DecisionTree> train_trees(const std::vector<std::vector<double>>& X,
                                      const std::vector<std::vector<int>>& Y,
                                      std::size_t n_targets,
                                      const ForestParams& params);

CohortForest train_forest(const CohortData& data, const ForestParams& params,
                          int history_days = 180);

}  // namespace triage::forest

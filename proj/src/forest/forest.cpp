#include "triage/forest/forest.hpp"

#include "triage/error.hpp"

namespace triage::forest {

util::Json ForestParams::to_json() const {
  return {{"n_trees", n_trees},         {"feature_fraction", feature_fraction},
          {"max_depth", max_depth},     {"min_samples_split", min_samples_split},
          {"seed", seed},               {"bootstrap", bootstrap}};
}

ForestParams ForestParams::from_json(const util::Json& j) {
  ForestParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  p.feature_fraction = j.value("feature_fraction", p.feature_fraction);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.min_samples_split = j.value("min_samples_split", p.min_samples_split);
  p.seed = j.value("seed", p.seed);
  p.bootstrap = j.value("bootstrap", p.bootstrap);
  return p;
}

std::vector<double> CohortForest::predict_proba(std::span<const double> x) const {
  if (x.size() != schema.size()) {
    throw ShapeError("feature vector has " + std::to_string(x.size()) +
                     " entries, schema expects " + std::to_string(schema.size()));
  }
  std::vector<double> out(targets.size(), 0.0);
  if (trees.empty()) return out;
  for (const DecisionTree& tree : trees) {
    const TreeNode& leaf = tree.leaf_for(x);
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += leaf.value[t];
  }
  for (double& v : out) v /= static_cast<double>(trees.size());
  return out;
}

EncodedRow CohortForest::encode(int age_years,
                                std::span<const cms::Assertion> assertions,
                                const History& history) const {
  return encode_row(schema, age_years, assertions, history.windowed(history_days));
}

util::Json CohortForest::to_json() const {
  util::Json jtrees = util::Json::array();
  for (const DecisionTree& tree : trees) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    util::Json leaves = util::Json::array();
    for (const TreeNode& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      leaves.push_back(n.is_leaf() ? util::Json(n.value) : util::Json(nullptr));
    }
    jtrees.push_back({{"feature", feature},
                      {"threshold", threshold},
                      {"left", left},
                      {"right", right},
                      {"value", leaves}});
  }
  return {{"format", "cohort_forest"},
          {"version", kForestFormatVersion},
          {"cohort",
           {{"chief_complaint", cohort.chief_complaint},
            {"age_bin", cohort.age_bin},
            {"sex", to_string(cohort.sex)}}},
          {"schema", schema.to_json()},
          {"targets", targets},
          {"params", params.to_json()},
          {"history_days", history_days},
          {"trees", jtrees}};
}

CohortForest CohortForest::from_json(const util::Json& j) {
  const std::string where = "forest";
  if (j.value("format", "") != "cohort_forest") {
    throw SchemaError(where + ": not a cohort forest document");
  }
  const int version = util::get_field<int>(j, "version", where);
  if (version != kForestFormatVersion) {
    throw IncompatibleVersionError("forest format version " + std::to_string(version) +
                                   " (expected " +
                                   std::to_string(kForestFormatVersion) + ")");
  }
  CohortForest f;
  const auto& c = j.at("cohort");
  f.cohort.chief_complaint = util::get_field<std::string>(c, "chief_complaint", where);
  f.cohort.age_bin = util::get_field<int>(c, "age_bin", where);
  f.cohort.sex = parse_sex(util::get_field<std::string>(c, "sex", where));
  f.schema = FeatureSchema::from_json(j.at("schema"));
  f.targets = util::get_field<std::vector<std::string>>(j, "targets", where);
  f.params = ForestParams::from_json(j.at("params"));
  f.history_days = util::get_field<int>(j, "history_days", where);
  for (const auto& jt : j.at("trees")) {
    DecisionTree tree;
    const auto feature = jt.at("feature").get<std::vector<int>>();
    const auto threshold = jt.at("threshold").get<std::vector<double>>();
    const auto left = jt.at("left").get<std::vector<int>>();
    const auto right = jt.at("right").get<std::vector<int>>();
    const auto& values = jt.at("value");
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n ||
        values.size() != n || n == 0) {
      throw IntegrityError(where + ": tree arrays are inconsistent");
    }
    for (std::size_t i = 0; i < n; ++i) {
      TreeNode node;
      node.feature = feature[i];
      node.threshold = threshold[i];
      node.left = left[i];
      node.right = right[i];
      if (node.is_leaf()) {
        node.value = values[i].get<std::vector<double>>();
        if (node.value.size() != f.targets.size()) {
          throw IntegrityError(where + ": leaf size does not match targets");
        }
      } else if (node.feature >= static_cast<int>(f.schema.size()) ||
                 node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                 node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n)) {
        throw IntegrityError(where + ": malformed tree node");
      }
      tree.nodes.push_back(std::move(node));
    }
    f.trees.push_back(std::move(tree));
  }
  return f;
}

void CohortForest::save(const std::filesystem::path& path) const {
  util::write_cbor_file(path, to_json());
}

CohortForest CohortForest::load(const std::filesystem::path& path) {
  try {
    return from_json(util::read_cbor_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

CohortForest train_forest(const CohortData& data, const ForestParams& params,
                          int history_days) {
  CohortForest f;
  f.cohort = data.cohort;
  f.schema = data.schema;
  f.targets = data.targets;
  f.params = params;
  f.history_days = history_days;
  f.trees = train_trees(data.X, data.Y, data.targets.size(), params);
  return f;
}

}  // namespace triage::forest

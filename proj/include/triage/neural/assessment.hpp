#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "triage/cms/catalog.hpp"
#include "triage/datagen/encounter.hpp"
#include "triage/neural/history_encoder.hpp"
#include "triage/neural/layers.hpp"

namespace triage::neural {

// Head order: diagnoses, medications, labs, imaging.
inline constexpr int kNumHeads = kNumOutcomeKinds;
using LossWeights = std::array<double, kNumHeads>;
inline constexpr LossWeights kDefaultLossWeights{3.0, 1.0, 0.9, 0.9};

// Throws ConfigError for negative, non-finite or all-zero weights.
void validate_loss_weights(const LossWeights& w);

struct AssessmentConfig {
  int width = 64;  // 1024 at full scale
  int depth = 7;
  int tap = 2;  // heads read the output of this trunk layer
  bool skip_every_layer = true;  // false: skip every second layer
  int embed_dim = 16;
  int concept_embed = 32;
  int history_embed = 16;
  int history_hidden = 16;
  bool use_history = true;
  int history_days = 365;
  int history_min_count = 5;
  std::size_t max_concepts = 1000;
  std::int64_t target_min_count = 100;
  double lift_threshold = 2.0;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  LossWeights loss_weights = kDefaultLossWeights;

  util::Json to_json() const;
  static AssessmentConfig from_json(const util::Json& j);
};

// Input and target vocabularies fixed from the training split.
struct AssessmentSchema {
  std::vector<std::string> chief_complaints;
  std::vector<std::string> concepts;
  std::vector<char> ordinal;
  HistoryVocab history;
  std::array<std::vector<std::string>, kNumHeads> targets;
  // Per head: target -> chief complaints for which (target, cc) passed the
  // lift filter. A code is a positive label only under such a cc.
  std::array<std::map<std::string, std::set<std::string>>, kNumHeads> retained;

  int cc_index(const std::string& cc) const;  // NotFoundError if unknown
  util::Json to_json() const;
  static AssessmentSchema from_json(const util::Json& j);
};

// Lift-filtered targets per head (lift > threshold, joint count >=
// target_min_count) and the most frequent concepts. Throws ConfigError when
// a head ends up with no targets.
AssessmentSchema build_assessment_schema(std::span<const Encounter> train,
                                         const cms::ConceptCatalog& catalog,
                                         const AssessmentConfig& config);

struct AssessmentExample {
  int cc = 0;
  int age_bin = 0;
  int sex = 0;
  // certain +1, absent -1, unasserted/unsure 0; durations log1p(d)/log1p(365);
  // severities level/10.
  RowVec concepts;
  HistorySeq history;
  std::array<std::vector<int>, kNumHeads> labels;
};

// The history is windowed to config.history_days; it is dropped entirely when
// use_history is false.
AssessmentExample make_example(const AssessmentSchema& schema, const Encounter& e,
                               const AssessmentConfig& config);
std::vector<AssessmentExample> make_examples(const AssessmentSchema& schema,
                                             std::span<const Encounter> encounters,
                                             const AssessmentConfig& config);

using HeadScores = std::array<std::vector<double>, kNumHeads>;
using Batch = std::vector<const AssessmentExample*>;

// Common surface of the deep model and the logistic baseline.
class MultiHeadModel {
 public:
  virtual ~MultiHeadModel() = default;
  // Weighted loss sum_h w_h * mean BCE_h; fills gradients when `backprop`.
  virtual double loss(const Batch& batch, const LossWeights& w, bool backprop) = 0;
  virtual HeadScores predict(const AssessmentExample& x) const = 0;
  virtual ParamList params() = 0;
  // Sets every head bias to the logit of its label's base rate.
  virtual void set_base_rates(std::span<const AssessmentExample> train) = 0;
};

// Embeddings of cc, age bin and sex, a projection of the concept vector and
// the history encoding are concatenated and projected to the trunk width.
// Trunk layer k: h_k = relu(h_{k-1} A_k + b_k) + skip_k with skip_k = h_{k-1}
// (every layer) or h_{k-2} for even k (every second layer). Heads read h_tap;
// layers after the tap are evaluated only by trunk_outputs.
class AssessmentModel : public MultiHeadModel {
 public:
  AssessmentModel() = default;
  AssessmentModel(AssessmentSchema schema, AssessmentConfig config);

  void init();
  double loss(const Batch& batch, const LossWeights& w, bool backprop) override;
  HeadScores predict(const AssessmentExample& x) const override;
  ParamList params() override;
  void set_base_rates(std::span<const AssessmentExample> train) override;

  // Logits per head for a batch (no caching).
  std::array<Mat, kNumHeads> logits(const Batch& batch) const;
  // Input representation h_0 for a batch.
  Mat input_representation(const Batch& batch) const;
  // Outputs h_1 .. h_depth of the full trunk for a given h_0.
  std::vector<Mat> trunk_outputs(const Mat& h0) const;

  // Parameter-level probe used by gradient checks: loss of a fixed linear
  // read-out of h_depth, with gradients through the whole trunk.
  double trunk_probe_loss(const Mat& h0, const Mat& probe, bool backprop);

  const AssessmentSchema& schema() const { return schema_; }
  const AssessmentConfig& config() const { return config_; }

  util::Json to_json() const;
  static AssessmentModel from_json(const util::Json& j);

  Embedding cc_embedding;
  Embedding age_embedding;
  Embedding sex_embedding;
  Dense concept_projection;
  HistoryEncoder history_encoder;
  Dense input_projection;
  std::vector<Dense> trunk;
  std::array<Dense, kNumHeads> heads;

 private:
  Mat forward_input(const Batch& batch);
  // Caches relu outputs r_1 .. r_upto.
  Mat forward_trunk(const Mat& h0, int upto);
  Mat backward_trunk(const Mat& dh_top, int upto);
  Mat skip_input(const std::vector<Mat>& h, int k) const;

  AssessmentSchema schema_;
  AssessmentConfig config_;
  std::vector<Mat> relu_out_;
};

// Logistic regression per head on the raw multi-hot input (cc, age bin and
// sex one-hots, the concept vector, and history items as a bag).
class LogisticBaseline : public MultiHeadModel {
 public:
  LogisticBaseline() = default;
  LogisticBaseline(AssessmentSchema schema, AssessmentConfig config);

  double loss(const Batch& batch, const LossWeights& w, bool backprop) override;
  HeadScores predict(const AssessmentExample& x) const override;
  ParamList params() override;
  void set_base_rates(std::span<const AssessmentExample> train) override;

  int input_dim() const;
  Mat features(const Batch& batch) const;

  util::Json to_json() const;
  static LogisticBaseline from_json(const util::Json& j);

  std::array<Dense, kNumHeads> heads;

 private:
  AssessmentSchema schema_;
  AssessmentConfig config_;
};

struct TrainReport {
  std::vector<double> epoch_loss;
};

Mat label_matrix(const Batch& batch, int head, int n_targets);

// Adam on shuffled minibatches; deterministic for a fixed config.seed.
void train_multihead(MultiHeadModel& model, std::span<const AssessmentExample> train,
                     const AssessmentConfig& config, TrainReport* report = nullptr);

AssessmentModel train_assessment(const AssessmentSchema& schema,
                                 std::span<const AssessmentExample> train,
                                 const AssessmentConfig& config,
                                 TrainReport* report = nullptr);
LogisticBaseline train_logistic_baseline(const AssessmentSchema& schema,
                                         std::span<const AssessmentExample> train,
                                         const AssessmentConfig& config,
                                         TrainReport* report = nullptr);

// Micro PR-AUC per head over the examples. Throws UndefinedMetricError when a
// head has no positive label.
std::array<double, kNumHeads> head_pr_auc(const MultiHeadModel& model,
                                          std::span<const AssessmentExample> eval);

struct ScoredCode {
  std::string code;
  double score = 0.0;
};
using Assessment = std::array<std::vector<ScoredCode>, kNumHeads>;

// Per-head scores sorted descending (ties by code).
Assessment predict_assessment(const AssessmentModel& model, const AssessmentExample& x);

inline constexpr int kAssessmentFormatVersion = 1;

}  // namespace triage::neural

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triage/cc/text_pipeline.hpp"
#include "triage/datagen/encounter.hpp"
#include "triage/neural/grad_check.hpp"
#include "triage/neural/history_encoder.hpp"
#include "triage/neural/layers.hpp"

namespace triage::cc {

struct CcConfig {
  TextPipelineConfig text;
  int hidden = 500;
  double dropout = 0.5;
  int embed_dim = 16;  // age-bin and sex embeddings
  int history_embed = 16;
  int history_hidden = 16;
  bool use_history = true;
  int history_days = 365;
  int history_min_count = 5;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  util::Json to_json() const;
  static CcConfig from_json(const util::Json& j);
};

struct CcExample {
  SparseVector text;
  int age_bin = 0;
  int sex = 0;
  neural::HistorySeq history;
  std::vector<int> labels;  // indices into the cc vocabulary
};

// Text vector plus age-bin, sex and history inputs feeding one ReLU hidden
// layer with dropout, then one logistic output per chief complaint. Output
// weights start at zero with bias logit(base rate).
class CcClassifier {
 public:
  CcClassifier() = default;
  CcClassifier(std::vector<std::string> ccs, int text_dim, neural::HistoryVocab vocab,
               CcConfig config);

  void init();
  // Mean over examples of the BCE summed over labels. Dropout is applied
  // only when `dropout_rng` is given.
  double loss(const std::vector<const CcExample*>& batch, bool backprop,
              neural::Rng* dropout_rng);
  std::vector<double> predict(const CcExample& x) const;
  neural::ParamList params();
  void set_base_rates(std::span<const CcExample> train);

  const std::vector<std::string>& chief_complaints() const { return ccs_; }
  const neural::HistoryVocab& history_vocab() const { return vocab_; }
  const CcConfig& config() const { return config_; }
  int text_dim() const { return text_dim_; }
  // Labels with no training example; their outputs stay at the prior.
  const std::vector<int>& prior_only() const { return prior_only_; }

  util::Json to_json() const;
  static CcClassifier from_json(const util::Json& j);

  neural::SparseDense text_layer;
  neural::Embedding age_embedding;
  neural::Embedding sex_embedding;
  neural::HistoryEncoder history_encoder;
  neural::Dense side_layer;
  neural::Dense output;

 private:
  neural::Mat side_input(const std::vector<const CcExample*>& batch, bool cache);
  neural::Mat side_input_const(const std::vector<const CcExample*>& batch) const;
  neural::SpMat text_matrix(const std::vector<const CcExample*>& batch) const;

  std::vector<std::string> ccs_;
  int text_dim_ = 0;
  neural::HistoryVocab vocab_;
  CcConfig config_;
  std::vector<int> prior_only_;
};

// A fitted text pipeline (absent when external embeddings are used) and the
// classifier.
struct CcModel {
  std::optional<TextPipeline> pipeline;
  CcClassifier classifier;

  // `text_id` selects an external embedding when there is no pipeline.
  CcExample make_example(const Encounter& e, const ExternalEmbeddings* external = nullptr) const;
  CcExample make_query(const std::string& text, int age_years, Sex sex,
                       const History& history) const;

  util::Json to_json() const;
  static CcModel from_json(const util::Json& j);
  void save(const std::filesystem::path& path) const;
  static CcModel load(const std::filesystem::path& path);
};

inline constexpr int kCcFormatVersion = 1;

// Fits the text pipeline on the training texts (or uses `external`, keyed by
// encounter id), builds the history vocabulary and trains with Adam. A cc in
// `ccs` that never occurs in training keeps its prior and logs a warning.
CcModel train_cc_model(std::span<const Encounter> train, std::vector<std::string> ccs,
                       const CcConfig& config, const ExternalEmbeddings* external = nullptr);

struct ScoredCc {
  std::string cc;
  double score = 0.0;
};

// Every cc with its sigmoid score, descending (ties by id).
std::vector<ScoredCc> predict_chief_complaints(const CcModel& model, const std::string& text,
                                               int age_years, Sex sex, const History& history);

// At most `top_k` entries with score >= `min_score`, in input order.
std::vector<ScoredCc> display_candidates(const std::vector<ScoredCc>& ranked, int top_k = 5,
                                         double min_score = 0.05);

// Micro PR-AUC over (example, cc) cells.
double cc_micro_pr_auc(const CcModel& model, std::span<const Encounter> eval,
                       const ExternalEmbeddings* external = nullptr);

// Gradient-check target for a small classifier with a fixed dropout mask.
neural::GradCheckTarget cc_grad_check_target(std::uint64_t seed);

}  // namespace triage::cc

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triage/util/json_io.hpp"

namespace triage::cc {

struct TextPipelineConfig {
  std::size_t max_features = 50000;
  double max_df = 0.5;  // a term is kept only when df / N <= max_df
  int ngram_max = 2;    // 1: unigrams only
  bool crop50 = false;  // keep only the first 50 characters of the input

  util::Json to_json() const;
  static TextPipelineConfig from_json(const util::Json& j);
};

// The standard English stopword list (NLTK).
const std::vector<std::string>& english_stopwords();

// Lowercase, digit runs -> "#", Penn-Treebank-like split of punctuation and
// contractions; punctuation-only tokens are dropped. Stopwords are kept.
std::vector<std::string> tokenize(const std::string& text);

// A sparse vector over the vocabulary, sorted by index.
struct SparseVector {
  std::vector<int> index;
  std::vector<double> value;
  bool empty() const { return index.empty(); }
};

class TextPipeline {
 public:
  // Throws ValidationError for an empty corpus.
  static TextPipeline fit(std::span<const std::string> corpus,
                          const TextPipelineConfig& config = {});

  // Tokens after stopword removal, then unigrams followed by bigrams.
  std::vector<std::string> terms(const std::string& text) const;
  // Raw tf times idf over in-vocabulary terms, L2-normalized. Empty or
  // fully out-of-vocabulary text gives the zero vector.
  SparseVector embed(const std::string& text) const;

  // Vocabulary in rank order (corpus frequency descending, ties by term).
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::vector<double>& idf() const { return idf_; }
  int index_of(const std::string& term) const;  // -1 when absent
  std::size_t size() const { return vocab_.size(); }
  const TextPipelineConfig& config() const { return config_; }
  std::int64_t n_documents() const { return n_docs_; }

  util::Json to_json() const;
  static TextPipeline from_json(const util::Json& j);

 private:
  void reindex();

  TextPipelineConfig config_;
  std::int64_t n_docs_ = 0;
  std::vector<std::string> vocab_;
  std::vector<double> idf_;
  std::unordered_map<std::string, int> index_;
};

// Precomputed fixed-size text vectors keyed by text id, read from JSONL rows
// {"text_id": ..., "vector": [...]}. Every vector has the same length.
struct ExternalEmbeddings {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  static ExternalEmbeddings load(const std::filesystem::path& path);
  // Throws NotFoundError for an unknown id.
  const std::vector<double>& at(const std::string& text_id) const;
};

}  // namespace triage::cc

#pragma once

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triage/datagen/encounter.hpp"
#include "triage/neural/lstm.hpp"

namespace triage::neural {

inline constexpr int kHistorySteps = kMaxHistoryEntries;

// Per-channel item vocabularies. Items seen fewer than `min_count` times in
// the training data are dropped.
struct HistoryVocab {
  std::array<std::vector<std::string>, kNumHistoryChannels> items;
  std::array<std::unordered_map<std::string, int>, kNumHistoryChannels> index;

  static HistoryVocab build(std::span<const Encounter> train, int min_count,
                            int lookback_days);
  int size(int channel) const { return static_cast<int>(items[channel].size()); }
  util::Json to_json() const;
  static HistoryVocab from_json(const util::Json& j);
  void reindex();
};

// Item ids per (channel, timestep). Timesteps are left-padded: the most recent
// entry sits at step 7 and an empty item list is an all-zero input.
struct HistorySeq {
  std::array<std::array<std::vector<int>, kHistorySteps>, kNumHistoryChannels> steps;
};

// Throws ShapeError when a channel has more than eight entries; callers
// truncate to the last eight. Out-of-vocabulary items are dropped.
HistorySeq encode_history_items(const HistoryVocab& vocab, const History& history);

// One item embedding table and one LSTM per channel. The input of a timestep
// is the sum of its items' embeddings. Output: the four final hidden states
// concatenated, (batch x 4H).
class HistoryEncoder {
 public:
  HistoryEncoder() = default;
  HistoryEncoder(const std::array<int, kNumHistoryChannels>& vocab_sizes,
                 int embed_dim, int hidden);

  void init(Rng& rng);
  Mat forward(const std::vector<const HistorySeq*>& batch);
  Mat forward_const(const std::vector<const HistorySeq*>& batch) const;
  void backward(const Mat& dout);

  int output_dim() const { return kNumHistoryChannels * hidden_; }
  int hidden() const { return hidden_; }
  int embed_dim() const { return embed_dim_; }
  ParamList params();

  std::array<Param, kNumHistoryChannels> tables;
  std::array<LstmCell, kNumHistoryChannels> cells;

 private:
  std::vector<Mat> channel_inputs(int ch, const std::vector<const HistorySeq*>& batch) const;

  int embed_dim_ = 0;
  int hidden_ = 0;
  std::vector<const HistorySeq*> batch_;
};

}  // namespace triage::neural

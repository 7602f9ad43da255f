#include "triage/neural/history_encoder.hpp"

#include <map>

#include "triage/error.hpp"

namespace triage::neural {

HistoryVocab HistoryVocab::build(std::span<const Encounter> train, int min_count,
                                 int lookback_days) {
  std::array<std::map<std::string, int>, kNumHistoryChannels> counts;
  for (const Encounter& e : train) {
    const History h = e.history.windowed(lookback_days);
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
      for (const auto& entry : h.channels[ch]) {
        for (const auto& item : entry.items) ++counts[ch][item];
      }
    }
  }
  HistoryVocab v;
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    for (const auto& [item, n] : counts[ch]) {
      if (n >= min_count) v.items[ch].push_back(item);
    }
  }
  v.reindex();
  return v;
}

void HistoryVocab::reindex() {
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    index[ch].clear();
    for (std::size_t i = 0; i < items[ch].size(); ++i) {
      index[ch].emplace(items[ch][i], static_cast<int>(i));
    }
  }
}

util::Json HistoryVocab::to_json() const {
  util::Json j = util::Json::object();
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) j[channel_name(ch)] = items[ch];
  return j;
}

HistoryVocab HistoryVocab::from_json(const util::Json& j) {
  HistoryVocab v;
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    v.items[ch] = util::get_field<std::vector<std::string>>(j, channel_name(ch),
                                                            "history vocab");
  }
  v.reindex();
  return v;
}

HistorySeq encode_history_items(const HistoryVocab& vocab, const History& history) {
  HistorySeq seq;
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    const auto& entries = history.channels[ch];
    if (entries.size() > static_cast<std::size_t>(kHistorySteps)) {
      throw ShapeError(std::string("history channel ") + channel_name(ch) + " has " +
                       std::to_string(entries.size()) + " entries (max 8)");
    }
    const std::size_t offset = kHistorySteps - entries.size();
    for (std::size_t t = 0; t < entries.size(); ++t) {
      auto& ids = seq.steps[ch][offset + t];
      for (const auto& item : entries[t].items) {
        auto it = vocab.index[ch].find(item);
        if (it != vocab.index[ch].end()) ids.push_back(it->second);
      }
    }
  }
  return seq;
}

HistoryEncoder::HistoryEncoder(const std::array<int, kNumHistoryChannels>& vocab_sizes,
                               int embed_dim, int hidden)
    : embed_dim_(embed_dim), hidden_(hidden) {
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    const std::string name = std::string("history.") + channel_name(ch);
    tables[ch].name = name + ".embedding";
    // One spare row keeps the table non-empty for channels without items.
    tables[ch].resize(std::max(vocab_sizes[ch], 1), embed_dim);
    cells[ch] = LstmCell(name + ".lstm", embed_dim, hidden);
  }
}

void HistoryEncoder::init(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 0.1);
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    for (Eigen::Index j = 0; j < tables[ch].value.cols(); ++j) {
      for (Eigen::Index i = 0; i < tables[ch].value.rows(); ++i) {
        tables[ch].value(i, j) = dist(rng);
      }
    }
    cells[ch].init(rng);
  }
}

ParamList HistoryEncoder::params() {
  ParamList out;
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    out.push_back(&tables[ch]);
    for (Param* p : cells[ch].params()) out.push_back(p);
  }
  return out;
}

std::vector<Mat> HistoryEncoder::channel_inputs(
    int ch, const std::vector<const HistorySeq*>& batch) const {
  std::vector<Mat> xs(kHistorySteps, Mat::Zero(static_cast<Eigen::Index>(batch.size()),
                                               embed_dim_));
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (int t = 0; t < kHistorySteps; ++t) {
      for (int id : batch[r]->steps[ch][t]) {
        if (id < 0 || id >= tables[ch].value.rows()) {
          throw ShapeError("history item id out of range");
        }
        xs[t].row(static_cast<Eigen::Index>(r)) += tables[ch].value.row(id);
      }
    }
  }
  return xs;
}

Mat HistoryEncoder::forward(const std::vector<const HistorySeq*>& batch) {
  batch_ = batch;
  Mat out(static_cast<Eigen::Index>(batch.size()), output_dim());
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    out.middleCols(ch * hidden_, hidden_) = cells[ch].forward(channel_inputs(ch, batch));
  }
  return out;
}

Mat HistoryEncoder::forward_const(const std::vector<const HistorySeq*>& batch) const {
  Mat out(static_cast<Eigen::Index>(batch.size()), output_dim());
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    out.middleCols(ch * hidden_, hidden_) =
        cells[ch].forward_const(channel_inputs(ch, batch));
  }
  return out;
}

void HistoryEncoder::backward(const Mat& dout) {
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    const auto dxs = cells[ch].backward(dout.middleCols(ch * hidden_, hidden_));
    for (std::size_t r = 0; r < batch_.size(); ++r) {
      for (int t = 0; t < kHistorySteps; ++t) {
        for (int id : batch_[r]->steps[ch][t]) {
          tables[ch].grad.row(id) += dxs[t].row(static_cast<Eigen::Index>(r));
        }
      }
    }
  }
}

}  // namespace triage::neural

#include "triage/cc/cc_classifier.hpp"

#include <algorithm>
#include <numeric>

#include "triage/error.hpp"
#include "triage/stats/metrics.hpp"
#include "triage/util/log.hpp"

namespace triage::cc {

using neural::Mat;
using neural::Rng;

namespace {

constexpr std::uint64_t kDropoutSalt = 0x632be59bd9b4e019ULL;

SparseVector dense_as_sparse(const std::vector<double>& v) {
  SparseVector s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s.index.push_back(static_cast<int>(i));
    s.value.push_back(v[i]);
  }
  return s;
}

neural::HistorySeq history_seq(const neural::HistoryVocab& vocab, const History& h,
                               const CcConfig& config) {
  if (!config.use_history) return {};
  return neural::encode_history_items(vocab, h.windowed(config.history_days));
}

}  // namespace

util::Json CcConfig::to_json() const {
  return {{"text", text.to_json()},
          {"hidden", hidden},
          {"dropout", dropout},
          {"embed_dim", embed_dim},
          {"history_embed", history_embed},
          {"history_hidden", history_hidden},
          {"use_history", use_history},
          {"history_days", history_days},
          {"history_min_count", history_min_count},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"seed", seed}};
}

CcConfig CcConfig::from_json(const util::Json& j) {
  CcConfig c;
  if (j.contains("text")) c.text = TextPipelineConfig::from_json(j.at("text"));
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.history_embed = j.value("history_embed", c.history_embed);
  c.history_hidden = j.value("history_hidden", c.history_hidden);
  c.use_history = j.value("use_history", c.use_history);
  c.history_days = j.value("history_days", c.history_days);
  c.history_min_count = j.value("history_min_count", c.history_min_count);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  if (c.hidden < 1) throw ConfigError("cc hidden width must be >= 1");
  if (c.dropout < 0.0 || c.dropout >= 1.0) throw ConfigError("cc dropout must be in [0, 1)");
  if (c.batch_size < 1) throw ConfigError("cc batch size must be >= 1");
  return c;
}

CcClassifier::CcClassifier(std::vector<std::string> ccs, int text_dim,
                           neural::HistoryVocab vocab, CcConfig config)
    : text_layer("cc.text", std::max(text_dim, 1), config.hidden),
      age_embedding("cc.age", kNumAgeBins, config.embed_dim),
      sex_embedding("cc.sex", 2, config.embed_dim),
      ccs_(std::move(ccs)),
      text_dim_(text_dim),
      vocab_(std::move(vocab)),
      config_(config) {
  if (ccs_.empty()) throw ConfigError("cc classifier needs at least one chief complaint");
  std::array<int, kNumHistoryChannels> sizes{};
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) sizes[ch] = vocab_.size(ch);
  history_encoder = neural::HistoryEncoder(sizes, config.history_embed, config.history_hidden);
  const int side = 2 * config.embed_dim + (config.use_history ? history_encoder.output_dim() : 0);
  side_layer = neural::Dense("cc.side", side, config.hidden);
  output = neural::Dense("cc.output", config.hidden, static_cast<int>(ccs_.size()));
}

void CcClassifier::init() {
  Rng rng(config_.seed);
  text_layer.init(rng, neural::Init::kHe);
  age_embedding.init(rng);
  sex_embedding.init(rng);
  history_encoder.init(rng);
  side_layer.init(rng, neural::Init::kHe);
  side_layer.b.value.setZero();  // the hidden bias lives in text_layer
  output.W.value.setZero();
  output.b.value.setZero();
}

neural::ParamList CcClassifier::params() {
  neural::ParamList out;
  for (auto* p : text_layer.params()) out.push_back(p);
  for (auto* p : age_embedding.params()) out.push_back(p);
  for (auto* p : sex_embedding.params()) out.push_back(p);
  if (config_.use_history) {
    for (auto* p : history_encoder.params()) out.push_back(p);
  }
  for (auto* p : side_layer.params()) out.push_back(p);
  for (auto* p : output.params()) out.push_back(p);
  return out;
}

void CcClassifier::set_base_rates(std::span<const CcExample> train) {
  std::vector<double> rate(ccs_.size(), 0.0);
  for (const auto& x : train) {
    for (int k : x.labels) rate[static_cast<std::size_t>(k)] += 1.0;
  }
  prior_only_.clear();
  for (std::size_t k = 0; k < rate.size(); ++k) {
    if (rate[k] == 0.0) {
      prior_only_.push_back(static_cast<int>(k));
      util::log_warn("chief complaint " + ccs_[k] +
                     " has no training example; its score stays at the prior");
    }
    rate[k] /= static_cast<double>(std::max<std::size_t>(train.size(), 1));
    output.b.value(0, static_cast<Eigen::Index>(k)) = neural::logit_of_rate(rate[k]);
  }
}

neural::SpMat CcClassifier::text_matrix(const std::vector<const CcExample*>& batch) const {
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const SparseVector& v = batch[r]->text;
    for (std::size_t i = 0; i < v.index.size(); ++i) {
      if (v.index[i] < 0 || v.index[i] >= text_dim_) throw ShapeError("cc text index out of range");
      trips.emplace_back(static_cast<int>(r), v.index[i], v.value[i]);
    }
  }
  neural::SpMat m(static_cast<Eigen::Index>(batch.size()), std::max(text_dim_, 1));
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Mat CcClassifier::side_input(const std::vector<const CcExample*>& batch, bool cache) {
  if (!cache) return side_input_const(batch);
  std::vector<int> ages, sexes;
  std::vector<const neural::HistorySeq*> hs;
  for (const auto* x : batch) {
    ages.push_back(x->age_bin);
    sexes.push_back(x->sex);
    hs.push_back(&x->history);
  }
  const Mat a = age_embedding.forward(ages);
  const Mat s = sex_embedding.forward(sexes);
  Mat out(static_cast<Eigen::Index>(batch.size()), side_layer.in());
  out.leftCols(a.cols()) = a;
  out.middleCols(a.cols(), s.cols()) = s;
  if (config_.use_history) out.rightCols(history_encoder.output_dim()) = history_encoder.forward(hs);
  return out;
}

Mat CcClassifier::side_input_const(const std::vector<const CcExample*>& batch) const {
  std::vector<int> ages, sexes;
  std::vector<const neural::HistorySeq*> hs;
  for (const auto* x : batch) {
    ages.push_back(x->age_bin);
    sexes.push_back(x->sex);
    hs.push_back(&x->history);
  }
  const Mat a = age_embedding.forward_const(ages);
  const Mat s = sex_embedding.forward_const(sexes);
  Mat out(static_cast<Eigen::Index>(batch.size()), side_layer.in());
  out.leftCols(a.cols()) = a;
  out.middleCols(a.cols(), s.cols()) = s;
  if (config_.use_history) {
    out.rightCols(history_encoder.output_dim()) = history_encoder.forward_const(hs);
  }
  return out;
}

double CcClassifier::loss(const std::vector<const CcExample*>& batch, bool backprop,
                          Rng* dropout_rng) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Mat y = Mat::Zero(n, static_cast<Eigen::Index>(ccs_.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k : batch[static_cast<std::size_t>(r)]->labels) y(r, k) = 1.0;
  }
  if (!backprop) {
    Mat pre = text_layer.forward_const(text_matrix(batch)) +
              side_layer.forward_const(side_input_const(batch));
    Mat h = neural::relu(pre);
    if (dropout_rng) {
      neural::Dropout d(config_.dropout);
      h = d.forward(h, true, *dropout_rng);
    }
    return neural::bce_with_logits(output.forward_const(h), y, neural::Reduction::kSumLabelsMean);
  }
  const Mat pre = text_layer.forward(text_matrix(batch)) +
                  side_layer.forward(side_input(batch, true));
  const Mat h = neural::relu(pre);
  neural::Dropout drop(config_.dropout);
  const Mat hd = dropout_rng ? drop.forward(h, true, *dropout_rng) : h;
  Mat g;
  const double l = neural::bce_with_logits(output.forward(hd), y,
                                           neural::Reduction::kSumLabelsMean, &g);
  Mat dh = output.backward(g);
  if (dropout_rng) dh = drop.backward(dh);
  const Mat dpre = neural::relu_backward(dh, h);
  text_layer.backward(dpre);
  const Mat dside = side_layer.backward(dpre);
  const int e = config_.embed_dim;
  age_embedding.backward(dside.leftCols(e));
  sex_embedding.backward(dside.middleCols(e, e));
  if (config_.use_history) history_encoder.backward(dside.rightCols(history_encoder.output_dim()));
  for (int k : prior_only_) {
    output.W.grad.col(k).setZero();
    output.b.grad(0, k) = 0.0;
  }
  return l;
}

std::vector<double> CcClassifier::predict(const CcExample& x) const {
  const std::vector<const CcExample*> batch{&x};
  const Mat pre = text_layer.forward_const(text_matrix(batch)) +
                  side_layer.forward_const(side_input_const(batch));
  const Mat p = neural::sigmoid(output.forward_const(neural::relu(pre)));
  return std::vector<double>(p.data(), p.data() + p.size());
}

util::Json CcClassifier::to_json() const {
  auto& self = const_cast<CcClassifier&>(*this);
  return {{"chief_complaints", ccs_},
          {"text_dim", text_dim_},
          {"history_vocab", vocab_.to_json()},
          {"config", config_.to_json()},
          {"prior_only", prior_only_},
          {"params", neural::params_to_json(self.params())}};
}

CcClassifier CcClassifier::from_json(const util::Json& j) {
  const std::string where = "cc classifier";
  CcClassifier m(util::get_field<std::vector<std::string>>(j, "chief_complaints", where),
                 util::get_field<int>(j, "text_dim", where),
                 neural::HistoryVocab::from_json(util::get_field<util::Json>(j, "history_vocab", where)),
                 CcConfig::from_json(util::get_field<util::Json>(j, "config", where)));
  m.prior_only_ = j.value("prior_only", std::vector<int>{});
  neural::params_from_json(m.params(), util::get_field<util::Json>(j, "params", where));
  return m;
}

CcExample CcModel::make_example(const Encounter& e, const ExternalEmbeddings* external) const {
  CcExample x;
  if (pipeline) {
    x.text = pipeline->embed(e.reason_text);
  } else if (external) {
    x.text = dense_as_sparse(external->at(e.encounter_id));
  } else {
    throw ConfigError("cc model has no text pipeline and no external embeddings were given");
  }
  x.age_bin = e.age_bin;
  x.sex = static_cast<int>(e.sex);
  x.history = history_seq(classifier.history_vocab(), e.history, classifier.config());
  const auto& ccs = classifier.chief_complaints();
  for (const auto& c : e.chief_complaints) {
    auto it = std::find(ccs.begin(), ccs.end(), c);
    if (it != ccs.end()) x.labels.push_back(static_cast<int>(it - ccs.begin()));
  }
  return x;
}

CcExample CcModel::make_query(const std::string& text, int age_years, Sex sex,
                              const History& history) const {
  if (!pipeline) throw ConfigError("free-text queries need a fitted text pipeline");
  CcExample x;
  x.text = pipeline->embed(text);
  x.age_bin = age_bin_of(age_years);
  x.sex = static_cast<int>(sex);
  x.history = history_seq(classifier.history_vocab(), history, classifier.config());
  return x;
}

util::Json CcModel::to_json() const {
  util::Json j = {{"format", "cc_model"},
                  {"version", kCcFormatVersion},
                  {"classifier", classifier.to_json()}};
  j["pipeline"] = pipeline ? pipeline->to_json() : util::Json();
  return j;
}

CcModel CcModel::from_json(const util::Json& j) {
  if (j.value("format", std::string()) != "cc_model") {
    throw IntegrityError("not a cc model document");
  }
  const int version = j.value("version", -1);
  if (version != kCcFormatVersion) {
    throw IncompatibleVersionError("cc model version " + std::to_string(version) +
                                   ", expected " + std::to_string(kCcFormatVersion));
  }
  CcModel m;
  if (j.contains("pipeline") && !j.at("pipeline").is_null()) {
    m.pipeline = TextPipeline::from_json(j.at("pipeline"));
  }
  m.classifier = CcClassifier::from_json(util::get_field<util::Json>(j, "classifier", "cc model"));
  return m;
}

void CcModel::save(const std::filesystem::path& path) const {
  util::write_cbor_file(path, to_json());
}

CcModel CcModel::load(const std::filesystem::path& path) {
  try {
    return from_json(util::read_cbor_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

CcModel train_cc_model(std::span<const Encounter> train, std::vector<std::string> ccs,
                       const CcConfig& config, const ExternalEmbeddings* external) {
  if (train.empty()) throw ValidationError("cc training set is empty");
  if (config.batch_size < 1) throw ConfigError("cc batch size must be >= 1");
  CcModel model;
  int text_dim = 0;
  if (external) {
    text_dim = external->dim;
  } else {
    std::vector<std::string> corpus;
    corpus.reserve(train.size());
    for (const auto& e : train) corpus.push_back(e.reason_text);
    model.pipeline = TextPipeline::fit(corpus, config.text);
    text_dim = static_cast<int>(model.pipeline->size());
  }
  const auto vocab = config.use_history
                         ? neural::HistoryVocab::build(train, config.history_min_count,
                                                       config.history_days)
                         : neural::HistoryVocab{};
  model.classifier = CcClassifier(std::move(ccs), text_dim, vocab, config);
  model.classifier.init();
  std::vector<CcExample> xs;
  xs.reserve(train.size());
  for (const auto& e : train) xs.push_back(model.make_example(e, external));
  model.classifier.set_base_rates(xs);

  const neural::ParamList params = model.classifier.params();
  neural::Adam adam(neural::AdamConfig{config.learning_rate});
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng dropout_rng(config.seed ^ kDropoutSalt);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const CcExample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&xs[order[i]]);
      neural::zero_grads(params);
      model.classifier.loss(batch, true, config.dropout > 0.0 ? &dropout_rng : nullptr);
      adam.step(params);
    }
  }
  return model;
}

std::vector<ScoredCc> predict_chief_complaints(const CcModel& model, const std::string& text,
                                               int age_years, Sex sex, const History& history) {
  const auto scores = model.classifier.predict(model.make_query(text, age_years, sex, history));
  const auto& ccs = model.classifier.chief_complaints();
  std::vector<ScoredCc> out;
  for (std::size_t k = 0; k < ccs.size(); ++k) out.push_back({ccs[k], scores[k]});
  std::sort(out.begin(), out.end(), [](const ScoredCc& a, const ScoredCc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.cc < b.cc;
  });
  return out;
}

std::vector<ScoredCc> display_candidates(const std::vector<ScoredCc>& ranked, int top_k,
                                         double min_score) {
  std::vector<ScoredCc> out;
  for (const auto& s : ranked) {
    if (static_cast<int>(out.size()) >= top_k) break;
    if (s.score >= min_score) out.push_back(s);
  }
  return out;
}

double cc_micro_pr_auc(const CcModel& model, std::span<const Encounter> eval,
                       const ExternalEmbeddings* external) {
  std::vector<double> scores;
  std::vector<char> truth;
  for (const auto& e : eval) {
    const CcExample x = model.make_example(e, external);
    const auto s = model.classifier.predict(x);
    const std::size_t base = truth.size();
    scores.insert(scores.end(), s.begin(), s.end());
    truth.resize(base + s.size(), 0);
    for (int k : x.labels) truth[base + static_cast<std::size_t>(k)] = 1;
  }
  return stats::average_precision(scores, truth);
}

neural::GradCheckTarget cc_grad_check_target(std::uint64_t seed) {
  struct State {
    CcClassifier model;
    std::vector<CcExample> xs;
    std::uint64_t seed;
  };
  auto s = std::make_shared<State>();
  s->seed = seed;
  neural::HistoryVocab vocab;
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) vocab.items[ch] = {"a", "b"};
  vocab.reindex();
  CcConfig config;
  config.hidden = 5;
  config.embed_dim = 2;
  config.history_embed = 2;
  config.history_hidden = 2;
  config.dropout = 0.5;
  config.seed = seed;
  s->model = CcClassifier({"cc_a", "cc_b", "cc_c"}, 6, vocab, config);
  s->model.init();
  Rng rng(seed + 1);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (Eigen::Index i = 0; i < s->model.output.W.value.size(); ++i) {
    s->model.output.W.value.data()[i] = nd(rng);
  }
  for (auto& table : s->model.history_encoder.tables) {
    for (Eigen::Index i = 0; i < table.value.size(); ++i) table.value.data()[i] = 2.0 * nd(rng);
  }
  std::uniform_int_distribution<int> coin(0, 2);
  for (int r = 0; r < 4; ++r) {
    CcExample x;
    for (int k = 0; k < 6; ++k) {
      if (coin(rng) == 0) {
        x.text.index.push_back(k);
        x.text.value.push_back(nd(rng));
      }
    }
    x.age_bin = coin(rng) * 3;
    x.sex = coin(rng) % 2;
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
      for (int t = 6; t < neural::kHistorySteps; ++t) {
        if (coin(rng) == 0) x.history.steps[ch][t].push_back(coin(rng) % 2);
      }
    }
    for (int k = 0; k < 3; ++k) {
      if (coin(rng) == 0) x.labels.push_back(k);
    }
    s->xs.push_back(std::move(x));
  }
  auto batch = [s] {
    std::vector<const CcExample*> b;
    for (const auto& x : s->xs) b.push_back(&x);
    return b;
  };
  neural::GradCheckTarget t;
  t.name = "cc-classifier";
  t.params = s->model.params();
  t.loss = [s, batch] {
    Rng drop(s->seed ^ kDropoutSalt);
    return s->model.loss(batch(), false, &drop);
  };
  t.compute_gradients = [s, batch] {
    neural::zero_grads(s->model.params());
    Rng drop(s->seed ^ kDropoutSalt);
    s->model.loss(batch(), true, &drop);
  };
  t.owner = s;
  return t;
}

}  // namespace triage::cc

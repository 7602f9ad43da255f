#include "triage/neural/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "triage/error.hpp"
#include "triage/stats/lift.hpp"
#include "triage/stats/metrics.hpp"

namespace triage::neural {

namespace {

constexpr const char* kHeadNames[kNumHeads] = {"diagnoses", "medications", "labs",
                                               "imaging"};

int sorted_index(const std::vector<std::string>& v, const std::string& key) {
  auto it = std::lower_bound(v.begin(), v.end(), key);
  if (it == v.end() || *it != key) return -1;
  return static_cast<int>(it - v.begin());
}

std::vector<double> base_rates(std::span<const AssessmentExample> train, int head,
                               int n_targets) {
  std::vector<double> rate(n_targets, 0.0);
  for (const auto& x : train) {
    for (int t : x.labels[head]) rate[t] += 1.0;
  }
  const double n = static_cast<double>(std::max<std::size_t>(train.size(), 1));
  for (double& r : rate) r /= n;
  return rate;
}

void set_head_bias(Dense& head, const std::vector<double>& rate) {
  for (std::size_t t = 0; t < rate.size(); ++t) {
    head.b.value(0, static_cast<Eigen::Index>(t)) = logit_of_rate(rate[t]);
  }
}

HeadScores to_scores(const std::array<Mat, kNumHeads>& logits) {
  HeadScores out;
  for (int h = 0; h < kNumHeads; ++h) {
    const Mat p = sigmoid(logits[h]);
    out[h].assign(p.data(), p.data() + p.size());
  }
  return out;
}

}  // namespace

Mat label_matrix(const Batch& batch, int head, int n_targets) {
  Mat y = Mat::Zero(static_cast<Eigen::Index>(batch.size()), n_targets);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (int t : batch[r]->labels[head]) y(static_cast<Eigen::Index>(r), t) = 1.0;
  }
  return y;
}

void validate_loss_weights(const LossWeights& w) {
  bool any = false;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("loss weights must be finite and non-negative");
    }
    any = any || v > 0.0;
  }
  if (!any) throw ConfigError("loss weights are all zero");
}

util::Json AssessmentConfig::to_json() const {
  return {{"width", width},
          {"depth", depth},
          {"tap", tap},
          {"skip_every_layer", skip_every_layer},
          {"embed_dim", embed_dim},
          {"concept_embed", concept_embed},
          {"history_embed", history_embed},
          {"history_hidden", history_hidden},
          {"use_history", use_history},
          {"history_days", history_days},
          {"history_min_count", history_min_count},
          {"max_concepts", max_concepts},
          {"target_min_count", target_min_count},
          {"lift_threshold", lift_threshold},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"seed", seed},
          {"loss_weights", loss_weights}};
}

AssessmentConfig AssessmentConfig::from_json(const util::Json& j) {
  AssessmentConfig c;
  c.width = j.value("width", c.width);
  c.depth = j.value("depth", c.depth);
  c.tap = j.value("tap", c.tap);
  c.skip_every_layer = j.value("skip_every_layer", c.skip_every_layer);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.concept_embed = j.value("concept_embed", c.concept_embed);
  c.history_embed = j.value("history_embed", c.history_embed);
  c.history_hidden = j.value("history_hidden", c.history_hidden);
  c.use_history = j.value("use_history", c.use_history);
  c.history_days = j.value("history_days", c.history_days);
  c.history_min_count = j.value("history_min_count", c.history_min_count);
  c.max_concepts = j.value("max_concepts", c.max_concepts);
  c.target_min_count = j.value("target_min_count", c.target_min_count);
  c.lift_threshold = j.value("lift_threshold", c.lift_threshold);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  if (j.contains("loss_weights")) c.loss_weights = j.at("loss_weights").get<LossWeights>();
  if (c.depth < 1 || c.tap < 1 || c.tap > c.depth || c.width < 1) {
    throw ConfigError("assessment trunk needs 1 <= tap <= depth and width >= 1");
  }
  return c;
}

int AssessmentSchema::cc_index(const std::string& cc) const {
  const int i = sorted_index(chief_complaints, cc);
  if (i < 0) throw NotFoundError("unknown chief complaint \"" + cc + "\"");
  return i;
}

util::Json AssessmentSchema::to_json() const {
  util::Json ord = util::Json::array();
  for (char c : ordinal) ord.push_back(c != 0);
  util::Json heads = util::Json::object();
  for (int h = 0; h < kNumHeads; ++h) {
    util::Json ret = util::Json::object();
    for (const auto& [t, ccs] : retained[h]) ret[t] = std::vector<std::string>(ccs.begin(), ccs.end());
    heads[kHeadNames[h]] = {{"targets", targets[h]}, {"retained", ret}};
  }
  return {{"chief_complaints", chief_complaints},
          {"concepts", concepts},
          {"ordinal", ord},
          {"history", history.to_json()},
          {"heads", heads}};
}

AssessmentSchema AssessmentSchema::from_json(const util::Json& j) {
  AssessmentSchema s;
  const std::string where = "assessment schema";
  s.chief_complaints = util::get_field<std::vector<std::string>>(j, "chief_complaints", where);
  s.concepts = util::get_field<std::vector<std::string>>(j, "concepts", where);
  for (bool b : util::get_field<std::vector<bool>>(j, "ordinal", where)) s.ordinal.push_back(b);
  s.history = HistoryVocab::from_json(j.at("history"));
  for (int h = 0; h < kNumHeads; ++h) {
    const auto& jh = j.at("heads").at(kHeadNames[h]);
    s.targets[h] = util::get_field<std::vector<std::string>>(jh, "targets", where);
    for (const auto& [t, ccs] : jh.at("retained").items()) {
      const auto v = ccs.get<std::vector<std::string>>();
      s.retained[h][t] = std::set<std::string>(v.begin(), v.end());
    }
  }
  return s;
}

AssessmentSchema build_assessment_schema(std::span<const Encounter> train,
                                         const cms::ConceptCatalog& catalog,
                                         const AssessmentConfig& config) {
  if (train.empty()) throw ConfigError("assessment training set is empty");
  AssessmentSchema s;
  std::set<std::string> ccs;
  std::map<std::string, std::int64_t> concept_count;
  for (const Encounter& e : train) {
    ccs.insert(e.chief_complaints.begin(), e.chief_complaints.end());
    std::set<std::string> seen;
    for (const auto& a : e.assertions) {
      const cms::Concept* c = catalog.find(a.concept_id);
      if (c == nullptr || c->response_type == cms::ResponseType::kFreeText) continue;
      if (seen.insert(a.concept_id).second) ++concept_count[a.concept_id];
    }
  }
  s.chief_complaints.assign(ccs.begin(), ccs.end());
  std::vector<std::pair<std::string, std::int64_t>> ranked(concept_count.begin(),
                                                           concept_count.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > config.max_concepts) ranked.resize(config.max_concepts);
  for (const auto& [id, n] : ranked) {
    s.concepts.push_back(id);
    s.ordinal.push_back(catalog.at(id).response_evaluation !=
                        cms::ResponseEvaluation::kCategorical);
  }
  if (config.use_history) {
    s.history = HistoryVocab::build(train, config.history_min_count, config.history_days);
  }
  for (int h = 0; h < kNumHeads; ++h) {
    const auto lift = stats::bayesian_lift(train, static_cast<OutcomeKind>(h));
    for (const auto& [t, c] :
         stats::filter_targets(lift, config.lift_threshold, config.target_min_count)) {
      s.retained[h][t].insert(c);
    }
    for (const auto& [t, c] : s.retained[h]) s.targets[h].push_back(t);
    if (s.targets[h].empty()) {
      throw ConfigError(std::string("assessment head ") + kHeadNames[h] +
                        " has no targets after lift filtering");
    }
  }
  return s;
}

AssessmentExample make_example(const AssessmentSchema& schema, const Encounter& e,
                               const AssessmentConfig& config) {
  if (e.chief_complaints.empty()) throw ValidationError("encounter has no chief complaint");
  AssessmentExample x;
  x.cc = schema.cc_index(e.chief_complaints.front());
  x.age_bin = e.age_bin;
  x.sex = e.sex == Sex::kFemale ? 0 : 1;
  x.concepts = RowVec::Zero(static_cast<Eigen::Index>(schema.concepts.size()));
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < schema.concepts.size(); ++i) pos.emplace(schema.concepts[i], i);
  for (const auto& a : e.assertions) {
    auto it = pos.find(a.concept_id);
    if (it == pos.end()) continue;
    double v = 0.0;
    if (const auto* c = std::get_if<cms::Certainty>(&a.value)) {
      if (*c == cms::Certainty::kCertain) v = 1.0;
      if (*c == cms::Certainty::kAbsent) v = -1.0;
    } else if (const auto* d = std::get_if<cms::DurationDays>(&a.value)) {
      v = std::log1p(static_cast<double>(d->days)) / std::log1p(365.0);
    } else if (const auto* s = std::get_if<cms::SeverityLevel>(&a.value)) {
      v = s->level / static_cast<double>(cms::kMaxSeverity);
    }
    x.concepts(static_cast<Eigen::Index>(it->second)) = v;
  }
  if (config.use_history) {
    x.history = encode_history_items(schema.history, e.history.windowed(config.history_days));
  }
  for (int h = 0; h < kNumHeads; ++h) {
    for (const auto& code : e.outcomes.codes[h]) {
      auto r = schema.retained[h].find(code);
      if (r == schema.retained[h].end()) continue;
      const bool under_cc = std::any_of(e.chief_complaints.begin(), e.chief_complaints.end(),
                                        [&](const std::string& c) { return r->second.count(c) > 0; });
      if (!under_cc) continue;
      x.labels[h].push_back(sorted_index(schema.targets[h], code));
    }
    std::sort(x.labels[h].begin(), x.labels[h].end());
    x.labels[h].erase(std::unique(x.labels[h].begin(), x.labels[h].end()), x.labels[h].end());
  }
  return x;
}

std::vector<AssessmentExample> make_examples(const AssessmentSchema& schema,
                                             std::span<const Encounter> encounters,
                                             const AssessmentConfig& config) {
  std::vector<AssessmentExample> out;
  out.reserve(encounters.size());
  for (const Encounter& e : encounters) out.push_back(make_example(schema, e, config));
  return out;
}

// ---------------------------------------------------------------------------
// AssessmentModel

AssessmentModel::AssessmentModel(AssessmentSchema schema, AssessmentConfig config)
    : schema_(std::move(schema)), config_(std::move(config)) {
  if (config_.depth < 1 || config_.tap < 1 || config_.tap > config_.depth) {
    throw ConfigError("assessment trunk needs 1 <= tap <= depth");
  }
  const int E = config_.embed_dim;
  cc_embedding = Embedding("cc", static_cast<int>(schema_.chief_complaints.size()), E);
  age_embedding = Embedding("age_bin", kNumAgeBins, E);
  sex_embedding = Embedding("sex", 2, E);
  concept_projection =
      Dense("concepts", static_cast<int>(schema_.concepts.size()), config_.concept_embed);
  int in = 3 * E + config_.concept_embed;
  if (config_.use_history) {
    std::array<int, kNumHistoryChannels> sizes{};
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) sizes[ch] = schema_.history.size(ch);
    history_encoder = HistoryEncoder(sizes, config_.history_embed, config_.history_hidden);
    in += history_encoder.output_dim();
  }
  input_projection = Dense("input", in, config_.width);
  trunk.clear();
  for (int k = 1; k <= config_.depth; ++k) {
    trunk.emplace_back("trunk" + std::to_string(k), config_.width, config_.width);
  }
  for (int h = 0; h < kNumHeads; ++h) {
    heads[h] = Dense(std::string("head.") + kHeadNames[h], config_.width,
                     static_cast<int>(schema_.targets[h].size()));
  }
}

void AssessmentModel::init() {
  Rng rng(config_.seed);
  cc_embedding.init(rng);
  age_embedding.init(rng);
  sex_embedding.init(rng);
  concept_projection.init(rng, Init::kGlorot);
  if (config_.use_history) history_encoder.init(rng);
  input_projection.init(rng, Init::kGlorot);
  for (Dense& layer : trunk) layer.init(rng, Init::kHe);
  for (Dense& head : heads) head.init(rng, Init::kZero);
}

ParamList AssessmentModel::params() {
  ParamList out;
  auto add = [&](ParamList ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  add(cc_embedding.params());
  add(age_embedding.params());
  add(sex_embedding.params());
  add(concept_projection.params());
  if (config_.use_history) add(history_encoder.params());
  add(input_projection.params());
  for (Dense& layer : trunk) add(layer.params());
  for (Dense& head : heads) add(head.params());
  return out;
}

void AssessmentModel::set_base_rates(std::span<const AssessmentExample> train) {
  for (int h = 0; h < kNumHeads; ++h) {
    set_head_bias(heads[h], base_rates(train, h, heads[h].out()));
  }
}

namespace {

struct InputParts {
  std::vector<int> cc, age, sex;
  Mat concepts;
  std::vector<const HistorySeq*> history;
};

InputParts split_batch(const Batch& batch, int n_concepts) {
  InputParts p;
  p.concepts.resize(static_cast<Eigen::Index>(batch.size()), n_concepts);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    p.cc.push_back(batch[r]->cc);
    p.age.push_back(batch[r]->age_bin);
    p.sex.push_back(batch[r]->sex);
    if (batch[r]->concepts.size() != n_concepts) {
      throw ShapeError("concept vector does not match the schema");
    }
    p.concepts.row(static_cast<Eigen::Index>(r)) = batch[r]->concepts;
    p.history.push_back(&batch[r]->history);
  }
  return p;
}

}  // namespace

Mat AssessmentModel::forward_input(const Batch& batch) {
  InputParts p = split_batch(batch, static_cast<int>(schema_.concepts.size()));
  std::vector<Mat> parts{cc_embedding.forward(p.cc), age_embedding.forward(p.age),
                         sex_embedding.forward(p.sex), concept_projection.forward(p.concepts)};
  if (config_.use_history) parts.push_back(history_encoder.forward(p.history));
  Eigen::Index cols = 0;
  for (const Mat& m : parts) cols += m.cols();
  Mat x(static_cast<Eigen::Index>(batch.size()), cols);
  Eigen::Index c = 0;
  for (const Mat& m : parts) {
    x.middleCols(c, m.cols()) = m;
    c += m.cols();
  }
  return input_projection.forward(x);
}

Mat AssessmentModel::input_representation(const Batch& batch) const {
  InputParts p = split_batch(batch, static_cast<int>(schema_.concepts.size()));
  std::vector<Mat> parts{cc_embedding.forward_const(p.cc), age_embedding.forward_const(p.age),
                         sex_embedding.forward_const(p.sex),
                         concept_projection.forward_const(p.concepts)};
  if (config_.use_history) parts.push_back(history_encoder.forward_const(p.history));
  Eigen::Index cols = 0;
  for (const Mat& m : parts) cols += m.cols();
  Mat x(static_cast<Eigen::Index>(batch.size()), cols);
  Eigen::Index c = 0;
  for (const Mat& m : parts) {
    x.middleCols(c, m.cols()) = m;
    c += m.cols();
  }
  return input_projection.forward_const(x);
}

Mat AssessmentModel::skip_input(const std::vector<Mat>& h, int k) const {
  if (config_.skip_every_layer) return h[k - 1];
  if (k % 2 == 0) return h[k - 2];
  return Mat::Zero(h[k - 1].rows(), h[k - 1].cols());
}

Mat AssessmentModel::forward_trunk(const Mat& h0, int upto) {
  std::vector<Mat> h{h0};
  relu_out_.assign(upto, Mat());
  for (int k = 1; k <= upto; ++k) {
    relu_out_[k - 1] = relu(trunk[k - 1].forward(h[k - 1]));
    h.push_back(relu_out_[k - 1] + skip_input(h, k));
  }
  return h.back();
}

Mat AssessmentModel::backward_trunk(const Mat& dh_top, int upto) {
  std::vector<Mat> dh(upto + 1, Mat::Zero(dh_top.rows(), dh_top.cols()));
  dh[upto] = dh_top;
  for (int k = upto; k >= 1; --k) {
    dh[k - 1] += trunk[k - 1].backward(relu_backward(dh[k], relu_out_[k - 1]));
    if (config_.skip_every_layer) {
      dh[k - 1] += dh[k];
    } else if (k % 2 == 0) {
      dh[k - 2] += dh[k];
    }
  }
  return dh[0];
}

std::vector<Mat> AssessmentModel::trunk_outputs(const Mat& h0) const {
  std::vector<Mat> h{h0};
  for (int k = 1; k <= config_.depth; ++k) {
    Mat r = relu(trunk[k - 1].forward_const(h[k - 1]));
    h.push_back(r + skip_input(h, k));
  }
  h.erase(h.begin());
  return h;
}

double AssessmentModel::loss(const Batch& batch, const LossWeights& w, bool backprop) {
  const Mat h0 = forward_input(batch);
  const Mat tap = forward_trunk(h0, config_.tap);
  double total = 0.0;
  Mat dtap = Mat::Zero(tap.rows(), tap.cols());
  for (int h = 0; h < kNumHeads; ++h) {
    const Mat logits = heads[h].forward(tap);
    const Mat y = label_matrix(batch, h, heads[h].out());
    Mat g;
    total += w[h] * bce_with_logits(logits, y, Reduction::kMean, backprop ? &g : nullptr);
    if (backprop) dtap += heads[h].backward(w[h] * g);
  }
  if (!backprop) return total;
  const Mat dh0 = backward_trunk(dtap, config_.tap);
  const Mat dx = input_projection.backward(dh0);
  const int E = config_.embed_dim;
  cc_embedding.backward(dx.middleCols(0, E));
  age_embedding.backward(dx.middleCols(E, E));
  sex_embedding.backward(dx.middleCols(2 * E, E));
  concept_projection.backward(dx.middleCols(3 * E, config_.concept_embed));
  if (config_.use_history) {
    history_encoder.backward(
        dx.middleCols(3 * E + config_.concept_embed, history_encoder.output_dim()));
  }
  return total;
}

double AssessmentModel::trunk_probe_loss(const Mat& h0, const Mat& probe, bool backprop) {
  const Mat top = forward_trunk(h0, config_.depth);
  const double loss = top.cwiseProduct(probe).sum();
  if (backprop) backward_trunk(probe, config_.depth);
  return loss;
}

std::array<Mat, kNumHeads> AssessmentModel::logits(const Batch& batch) const {
  const Mat h0 = input_representation(batch);
  std::vector<Mat> h{h0};
  for (int k = 1; k <= config_.tap; ++k) {
    Mat r = relu(trunk[k - 1].forward_const(h[k - 1]));
    h.push_back(r + skip_input(h, k));
  }
  std::array<Mat, kNumHeads> out;
  for (int i = 0; i < kNumHeads; ++i) out[i] = heads[i].forward_const(h.back());
  return out;
}

HeadScores AssessmentModel::predict(const AssessmentExample& x) const {
  return to_scores(logits({&x}));
}

util::Json AssessmentModel::to_json() const {
  auto* self = const_cast<AssessmentModel*>(this);
  return {{"format", "assessment_model"},
          {"version", kAssessmentFormatVersion},
          {"config", config_.to_json()},
          {"schema", schema_.to_json()},
          {"params", params_to_json(self->params())}};
}

AssessmentModel AssessmentModel::from_json(const util::Json& j) {
  if (j.value("format", "") != "assessment_model") {
    throw SchemaError("not an assessment model document");
  }
  const int version = util::get_field<int>(j, "version", "assessment model");
  if (version != kAssessmentFormatVersion) {
    throw IncompatibleVersionError("assessment model version " + std::to_string(version));
  }
  AssessmentModel m(AssessmentSchema::from_json(j.at("schema")),
                    AssessmentConfig::from_json(j.at("config")));
  params_from_json(m.params(), j.at("params"));
  return m;
}

// ---------------------------------------------------------------------------
// LogisticBaseline

LogisticBaseline::LogisticBaseline(AssessmentSchema schema, AssessmentConfig config)
    : schema_(std::move(schema)), config_(std::move(config)) {
  for (int h = 0; h < kNumHeads; ++h) {
    heads[h] = Dense(std::string("logistic.") + kHeadNames[h], input_dim(),
                     static_cast<int>(schema_.targets[h].size()));
  }
}

int LogisticBaseline::input_dim() const {
  int d = static_cast<int>(schema_.chief_complaints.size()) + kNumAgeBins + 2 +
          static_cast<int>(schema_.concepts.size());
  if (config_.use_history) {
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) d += schema_.history.size(ch);
  }
  return d;
}

Mat LogisticBaseline::features(const Batch& batch) const {
  Mat x = Mat::Zero(static_cast<Eigen::Index>(batch.size()), input_dim());
  const int n_cc = static_cast<int>(schema_.chief_complaints.size());
  const int n_c = static_cast<int>(schema_.concepts.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    const AssessmentExample& e = *batch[r];
    x(row, e.cc) = 1.0;
    x(row, n_cc + e.age_bin) = 1.0;
    x(row, n_cc + kNumAgeBins + e.sex) = 1.0;
    x.block(row, n_cc + kNumAgeBins + 2, 1, n_c) = e.concepts;
    if (config_.use_history) {
      int offset = n_cc + kNumAgeBins + 2 + n_c;
      for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
        for (const auto& step : e.history.steps[ch]) {
          for (int id : step) x(row, offset + id) = 1.0;
        }
        offset += schema_.history.size(ch);
      }
    }
  }
  return x;
}

ParamList LogisticBaseline::params() {
  ParamList out;
  for (Dense& h : heads) {
    for (Param* p : h.params()) out.push_back(p);
  }
  return out;
}

void LogisticBaseline::set_base_rates(std::span<const AssessmentExample> train) {
  for (int h = 0; h < kNumHeads; ++h) {
    set_head_bias(heads[h], base_rates(train, h, heads[h].out()));
  }
}

double LogisticBaseline::loss(const Batch& batch, const LossWeights& w, bool backprop) {
  const Mat x = features(batch);
  double total = 0.0;
  for (int h = 0; h < kNumHeads; ++h) {
    const Mat logits = heads[h].forward(x);
    Mat g;
    total += w[h] * bce_with_logits(logits, label_matrix(batch, h, heads[h].out()),
                                    Reduction::kMean, backprop ? &g : nullptr);
    if (backprop) heads[h].backward(w[h] * g);
  }
  return total;
}

HeadScores LogisticBaseline::predict(const AssessmentExample& x) const {
  const Mat f = features({&x});
  std::array<Mat, kNumHeads> logits;
  for (int h = 0; h < kNumHeads; ++h) logits[h] = heads[h].forward_const(f);
  return to_scores(logits);
}

util::Json LogisticBaseline::to_json() const {
  auto* self = const_cast<LogisticBaseline*>(this);
  return {{"format", "logistic_baseline"},
          {"version", kAssessmentFormatVersion},
          {"config", config_.to_json()},
          {"schema", schema_.to_json()},
          {"params", params_to_json(self->params())}};
}

LogisticBaseline LogisticBaseline::from_json(const util::Json& j) {
  if (j.value("format", "") != "logistic_baseline") {
    throw SchemaError("not a logistic baseline document");
  }
  if (util::get_field<int>(j, "version", "logistic baseline") != kAssessmentFormatVersion) {
    throw IncompatibleVersionError("logistic baseline version mismatch");
  }
  LogisticBaseline m(AssessmentSchema::from_json(j.at("schema")),
                     AssessmentConfig::from_json(j.at("config")));
  params_from_json(m.params(), j.at("params"));
  return m;
}

// ---------------------------------------------------------------------------
// Training and evaluation

void train_multihead(MultiHeadModel& model, std::span<const AssessmentExample> train,
                     const AssessmentConfig& config, TrainReport* report) {
  validate_loss_weights(config.loss_weights);
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  model.set_base_rates(train);
  const ParamList params = model.params();
  Adam adam(AdamConfig{config.learning_rate});
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Batch batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
      zero_grads(params);
      sum += model.loss(batch, config.loss_weights, true);
      adam.step(params);
      ++batches;
    }
    if (report) report->epoch_loss.push_back(batches ? sum / batches : 0.0);
  }
}

AssessmentModel train_assessment(const AssessmentSchema& schema,
                                 std::span<const AssessmentExample> train,
                                 const AssessmentConfig& config, TrainReport* report) {
  AssessmentModel model(schema, config);
  model.init();
  train_multihead(model, train, config, report);
  return model;
}

LogisticBaseline train_logistic_baseline(const AssessmentSchema& schema,
                                         std::span<const AssessmentExample> train,
                                         const AssessmentConfig& config,
                                         TrainReport* report) {
  LogisticBaseline model(schema, config);
  train_multihead(model, train, config, report);
  return model;
}

std::array<double, kNumHeads> head_pr_auc(const MultiHeadModel& model,
                                          std::span<const AssessmentExample> eval) {
  std::array<std::vector<double>, kNumHeads> scores;
  std::array<std::vector<char>, kNumHeads> truth;
  for (const AssessmentExample& x : eval) {
    const HeadScores s = model.predict(x);
    for (int h = 0; h < kNumHeads; ++h) {
      const std::size_t base = truth[h].size();
      scores[h].insert(scores[h].end(), s[h].begin(), s[h].end());
      truth[h].resize(base + s[h].size(), 0);
      for (int t : x.labels[h]) truth[h][base + t] = 1;
    }
  }
  std::array<double, kNumHeads> out{};
  for (int h = 0; h < kNumHeads; ++h) out[h] = stats::average_precision(scores[h], truth[h]);
  return out;
}

Assessment predict_assessment(const AssessmentModel& model, const AssessmentExample& x) {
  const HeadScores s = model.predict(x);
  Assessment out;
  for (int h = 0; h < kNumHeads; ++h) {
    for (std::size_t t = 0; t < s[h].size(); ++t) {
      out[h].push_back({model.schema().targets[h][t], s[h][t]});
    }
    std::sort(out[h].begin(), out[h].end(), [](const ScoredCode& a, const ScoredCode& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.code < b.code;
    });
  }
  return out;
}

}  // namespace triage::neural

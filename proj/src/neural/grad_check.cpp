#include "triage/neural/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "triage/neural/assessment.hpp"
#include "triage/neural/lstm.hpp"

namespace triage::neural {

double gradient_check(const GradCheckTarget& target, double epsilon,
                      std::size_t max_entries) {
  target.compute_gradients();
  std::vector<Mat> analytic;
  for (const Param* p : target.params) analytic.push_back(p->grad);
  double worst = 0.0;
  for (std::size_t k = 0; k < target.params.size(); ++k) {
    Param& p = *target.params[k];
    const auto n = static_cast<std::size_t>(p.value.size());
    const std::size_t stride =
        (max_entries == 0 || n <= max_entries) ? 1 : (n + max_entries - 1) / max_entries;
    for (std::size_t i = 0; i < n; i += stride) {
      double& v = p.value.data()[i];
      const double saved = v;
      v = saved + epsilon;
      const double up = target.loss();
      v = saved - epsilon;
      const double down = target.loss();
      v = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double g = analytic[k].data()[i];
      const double denom = std::max({std::abs(g), std::abs(fd), 1e-8});
      worst = std::max(worst, std::abs(g - fd) / denom);
    }
  }
  return worst;
}

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = dist(rng);
  }
  return m;
}

Mat random_labels(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::bernoulli_distribution coin(0.4);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = coin(rng) ? 1.0 : 0.0;
  }
  return m;
}

GradCheckTarget dense_target(Rng& rng) {
  struct State {
    Dense layer{"dense", 5, 3};
    Mat x, y;
  };
  auto s = std::make_shared<State>();
  s->layer.init(rng, Init::kGlorot);
  s->layer.b.value = random_mat(rng, 1, 3, 0.1);
  s->x = random_mat(rng, 4, 5);
  s->y = random_labels(rng, 4, 3);
  GradCheckTarget t;
  t.name = "dense+bce";
  t.params = s->layer.params();
  t.loss = [s] {
    return bce_with_logits(s->layer.forward_const(s->x), s->y, Reduction::kMean);
  };
  t.compute_gradients = [s] {
    zero_grads(s->layer.params());
    Mat g;
    bce_with_logits(s->layer.forward(s->x), s->y, Reduction::kMean, &g);
    s->layer.backward(g);
  };
  t.owner = s;
  return t;
}

GradCheckTarget lstm_target(Rng& rng, int steps) {
  struct State {
    LstmCell cell{"lstm", 4, 3};
    std::vector<Mat> xs;
    Mat probe;
  };
  auto s = std::make_shared<State>();
  s->cell.init(rng);
  s->cell.b.value = random_mat(rng, 1, 12, 0.3);
  for (int t = 0; t < steps; ++t) s->xs.push_back(random_mat(rng, 2, 4));
  s->probe = random_mat(rng, 2, 3);
  GradCheckTarget t;
  t.name = steps == 1 ? "lstm-step" : "lstm-rollout";
  t.params = s->cell.params();
  t.loss = [s] { return s->cell.forward_const(s->xs).cwiseProduct(s->probe).sum(); };
  t.compute_gradients = [s] {
    zero_grads(s->cell.params());
    s->cell.forward(s->xs);
    s->cell.backward(s->probe);
  };
  t.owner = s;
  return t;
}

GradCheckTarget history_target(Rng& rng) {
  struct State {
    HistoryEncoder enc{{3, 4, 2, 3}, 3, 2};
    std::vector<HistorySeq> seqs;
    Mat probe;
  };
  auto s = std::make_shared<State>();
  s->enc.init(rng);
  s->seqs.resize(2);
  std::uniform_int_distribution<int> coin(0, 2);
  for (auto& seq : s->seqs) {
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
      const int vocab = static_cast<int>(s->enc.tables[ch].value.rows());
      for (int t = 4; t < kHistorySteps; ++t) {
        for (int id = 0; id < vocab; ++id) {
          if (coin(rng) == 0) seq.steps[ch][t].push_back(id);
        }
      }
    }
  }
  s->probe = random_mat(rng, 2, s->enc.output_dim());
  GradCheckTarget t;
  t.name = "history-encoder";
  t.params = s->enc.params();
  t.loss = [s] {
    std::vector<const HistorySeq*> batch{&s->seqs[0], &s->seqs[1]};
    return s->enc.forward_const(batch).cwiseProduct(s->probe).sum();
  };
  t.compute_gradients = [s] {
    zero_grads(s->enc.params());
    std::vector<const HistorySeq*> batch{&s->seqs[0], &s->seqs[1]};
    s->enc.forward(batch);
    s->enc.backward(s->probe);
  };
  t.owner = s;
  return t;
}

AssessmentSchema toy_schema() {
  AssessmentSchema s;
  s.chief_complaints = {"cc_a", "cc_b", "cc_c"};
  s.concepts = {"f1", "f2", "f3", "f4", "f5"};
  s.ordinal = {0, 0, 0, 1, 0};
  for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
    s.history.items[ch] = {"a", "b", "c"};
  }
  s.history.reindex();
  const char* prefix[kNumHeads] = {"dx", "med", "lab", "img"};
  for (int h = 0; h < kNumHeads; ++h) {
    for (int t = 0; t < 3; ++t) {
      const std::string code = std::string(prefix[h]) + std::to_string(t);
      s.targets[h].push_back(code);
      s.retained[h][code] = {"cc_a", "cc_b", "cc_c"};
    }
  }
  return s;
}

AssessmentConfig toy_config(std::uint64_t seed, bool every_layer) {
  AssessmentConfig c;
  c.width = 6;
  c.embed_dim = 3;
  c.concept_embed = 4;
  c.history_embed = 3;
  c.history_hidden = 2;
  c.seed = seed;
  c.skip_every_layer = every_layer;
  return c;
}

std::vector<AssessmentExample> toy_examples(Rng& rng, const AssessmentSchema& schema) {
  std::vector<AssessmentExample> xs(4);
  std::uniform_int_distribution<int> cc(0, 2), age(0, kNumAgeBins - 1), sex(0, 1), coin(0, 2);
  for (auto& x : xs) {
    x.cc = cc(rng);
    x.age_bin = age(rng);
    x.sex = sex(rng);
    x.concepts = random_mat(rng, 1, static_cast<Eigen::Index>(schema.concepts.size()));
    for (int ch = 0; ch < kNumHistoryChannels; ++ch) {
      for (int t = 5; t < kHistorySteps; ++t) {
        for (int id = 0; id < 3; ++id) {
          if (coin(rng) == 0) x.history.steps[ch][t].push_back(id);
        }
      }
    }
    for (int h = 0; h < kNumHeads; ++h) {
      for (int t = 0; t < 3; ++t) {
        if (coin(rng) == 0) x.labels[h].push_back(t);
      }
    }
  }
  return xs;
}

GradCheckTarget trunk_target(Rng& rng, std::uint64_t seed, bool every_layer) {
  struct State {
    AssessmentModel model;
    Mat h0, probe;
  };
  auto s = std::make_shared<State>();
  s->model = AssessmentModel(toy_schema(), toy_config(seed, every_layer));
  s->model.init();
  for (Dense& layer : s->model.trunk) layer.b.value = random_mat(rng, 1, 6, 0.1);
  s->h0 = random_mat(rng, 3, 6);
  s->probe = random_mat(rng, 3, 6);
  GradCheckTarget t;
  t.name = every_layer ? "skip-trunk" : "skip-trunk-every-second";
  for (Dense& layer : s->model.trunk) {
    for (Param* p : layer.params()) t.params.push_back(p);
  }
  t.loss = [s] {
    return s->model.trunk_outputs(s->h0).back().cwiseProduct(s->probe).sum();
  };
  t.compute_gradients = [s] {
    zero_grads(s->model.params());
    s->model.trunk_probe_loss(s->h0, s->probe, true);
  };
  t.owner = s;
  return t;
}

GradCheckTarget head_target(Rng& rng, std::uint64_t seed, int head) {
  static const char* kNames[kNumHeads] = {"head-diagnoses", "head-medications",
                                          "head-labs", "head-imaging"};
  struct State {
    AssessmentModel model;
    std::vector<AssessmentExample> xs;
    LossWeights w{};
  };
  auto s = std::make_shared<State>();
  s->model = AssessmentModel(toy_schema(), toy_config(seed, true));
  s->model.init();
  // Nonzero head weights so gradients reach the trunk and the inputs.
  for (Dense& h : s->model.heads) {
    h.W.value = random_mat(rng, h.W.value.rows(), h.W.value.cols(), 0.5);
    h.b.value = random_mat(rng, 1, h.b.value.cols(), 0.1);
  }
  for (Dense& layer : s->model.trunk) layer.b.value = random_mat(rng, 1, 6, 0.1);
  // Unit-scale history embeddings keep every recurrent gradient well above
  // the finite-difference noise floor.
  for (Param& table : s->model.history_encoder.tables) {
    table.value = random_mat(rng, table.value.rows(), table.value.cols());
  }
  s->xs = toy_examples(rng, s->model.schema());
  s->w[head] = 1.0;
  GradCheckTarget t;
  t.name = kNames[head];
  t.params = s->model.params();
  auto batch = [s] {
    Batch b;
    for (const auto& x : s->xs) b.push_back(&x);
    return b;
  };
  t.loss = [s, batch] { return s->model.loss(batch(), s->w, false); };
  t.compute_gradients = [s, batch] {
    zero_grads(s->model.params());
    s->model.loss(batch(), s->w, true);
  };
  t.owner = s;
  return t;
}

}  // namespace

std::vector<GradCheckTarget> standard_grad_check_targets(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckTarget> out;
  out.push_back(dense_target(rng));
  out.push_back(lstm_target(rng, 1));
  out.push_back(lstm_target(rng, kHistorySteps));
  out.push_back(history_target(rng));
  out.push_back(trunk_target(rng, seed, true));
  out.push_back(trunk_target(rng, seed, false));
  for (int h = 0; h < kNumHeads; ++h) out.push_back(head_target(rng, seed, h));
  return out;
}

}  // namespace triage::neural

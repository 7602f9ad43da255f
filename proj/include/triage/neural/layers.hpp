#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "triage/util/json_io.hpp"

namespace triage::neural {

// Batches are row-major in meaning: one row per example.
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Rng = std::mt19937_64;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  void resize(Eigen::Index rows, Eigen::Index cols);
  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

using ParamList = std::vector<Param*>;
void zero_grads(const ParamList& params);

enum class Init { kZero, kHe, kGlorot };
void init_param(Param& p, Init scheme, Rng& rng);

util::Json param_to_json(const Param& p);
void param_from_json(Param& p, const util::Json& j);
// Every parameter by name; from_json requires the same names and shapes.
util::Json params_to_json(const ParamList& params);
void params_from_json(const ParamList& params, const util::Json& j);

// y = x W + b, with W stored (in x out).
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int in, int out);

  void init(Rng& rng, Init scheme = Init::kHe);
  Mat forward(const Mat& x);
  Mat forward_const(const Mat& x) const;
  // Accumulates into W.grad and b.grad; returns dL/dx.
  Mat backward(const Mat& dy);
  ParamList params() { return {&W, &b}; }
  int in() const { return static_cast<int>(W.value.rows()); }
  int out() const { return static_cast<int>(W.value.cols()); }

  Param W;
  Param b;

 private:
  Mat x_;
};

// Dense layer over sparse input rows; no gradient w.r.t. the input.
class SparseDense {
 public:
  SparseDense() = default;
  SparseDense(std::string name, int in, int out);

  void init(Rng& rng, Init scheme = Init::kHe);
  Mat forward(const SpMat& x);
  Mat forward_const(const SpMat& x) const;
  void backward(const Mat& dy);
  ParamList params() { return {&W, &b}; }

  Param W;
  Param b;

 private:
  SpMat x_;
};

// Rows of a lookup table; repeated indices accumulate gradient.
class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string name, int vocab, int dim);

  void init(Rng& rng);
  Mat forward(const std::vector<int>& ids);
  Mat forward_const(const std::vector<int>& ids) const;
  void backward(const Mat& dy);
  ParamList params() { return {&table}; }
  int dim() const { return static_cast<int>(table.value.cols()); }

  Param table;

 private:
  std::vector<int> ids_;
};

Mat relu(const Mat& x);
// dL/dx given dL/dy and y = relu(x).
Mat relu_backward(const Mat& dy, const Mat& y);
Mat sigmoid(const Mat& x);

// Inverted dropout: kept units are scaled by 1 / (1 - rate).
class Dropout {
 public:
  explicit Dropout(double rate = 0.0) : rate_(rate) {}
  Mat forward(const Mat& x, bool training, Rng& rng);
  Mat backward(const Mat& dy) const;
  double rate() const { return rate_; }

 private:
  double rate_;
  Mat mask_;
  bool active_ = false;
};

enum class Reduction {
  kMean,           // mean over every (example, label) cell
  kSumLabelsMean,  // sum over labels, mean over examples
};

// Numerically stable binary cross-entropy on logits. Writes dL/dlogits when
// `grad` is non-null.
double bce_with_logits(const Mat& logits, const Mat& targets, Reduction reduction,
                       Mat* grad = nullptr);

// logit(p) with p clipped to [1e-4, 1 - 1e-4].
double logit_of_rate(double p);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(const ParamList& params);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace triage::neural

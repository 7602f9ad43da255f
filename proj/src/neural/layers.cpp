#include "triage/neural/layers.hpp"

#include <cmath>

#include "triage/error.hpp"

namespace triage::neural {

void Param::resize(Eigen::Index rows, Eigen::Index cols) {
  value = Mat::Zero(rows, cols);
  grad = Mat::Zero(rows, cols);
  adam_m = Mat::Zero(rows, cols);
  adam_v = Mat::Zero(rows, cols);
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->zero_grad();
}

void init_param(Param& p, Init scheme, Rng& rng) {
  const double fan_in = static_cast<double>(std::max<Eigen::Index>(p.value.rows(), 1));
  const double fan_out = static_cast<double>(std::max<Eigen::Index>(p.value.cols(), 1));
  double sd = 0.0;
  switch (scheme) {
    case Init::kZero: break;
    case Init::kHe: sd = std::sqrt(2.0 / fan_in); break;
    case Init::kGlorot: sd = std::sqrt(2.0 / (fan_in + fan_out)); break;
  }
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      p.value(i, j) = sd == 0.0 ? 0.0 : sd * dist(rng);
    }
  }
}

util::Json param_to_json(const Param& p) {
  std::vector<double> data;
  data.reserve(p.value.size());
  for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) data.push_back(p.value(i, j));
  }
  return {{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()},
          {"data", data}};
}

void param_from_json(Param& p, const util::Json& j) {
  const auto rows = util::get_field<Eigen::Index>(j, "rows", p.name);
  const auto cols = util::get_field<Eigen::Index>(j, "cols", p.name);
  const auto data = util::get_field<std::vector<double>>(j, "data", p.name);
  if (rows != p.value.rows() || cols != p.value.cols() ||
      static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw IntegrityError("parameter " + p.name + " has an unexpected shape");
  }
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) p.value(i, c) = data[k++];
  }
}

util::Json params_to_json(const ParamList& params) {
  util::Json arr = util::Json::array();
  for (const Param* p : params) arr.push_back(param_to_json(*p));
  return arr;
}

void params_from_json(const ParamList& params, const util::Json& j) {
  if (!j.is_array() || j.size() != params.size()) {
    throw IntegrityError("parameter list does not match the model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (j[i].value("name", "") != params[i]->name) {
      throw IntegrityError("expected parameter " + params[i]->name);
    }
    param_from_json(*params[i], j[i]);
  }
}

Dense::Dense(std::string name, int in, int out) {
  W.name = name + ".W";
  b.name = name + ".b";
  W.resize(in, out);
  b.resize(1, out);
}

void Dense::init(Rng& rng, Init scheme) {
  init_param(W, scheme, rng);
  b.value.setZero();
}

Mat Dense::forward(const Mat& x) {
  x_ = x;
  return forward_const(x);
}

Mat Dense::forward_const(const Mat& x) const {
  if (x.cols() != W.value.rows()) {
    throw ShapeError(W.name + ": input width " + std::to_string(x.cols()) +
                     ", expected " + std::to_string(W.value.rows()));
  }
  Mat y = x * W.value;
  y.rowwise() += b.value.row(0);
  return y;
}

Mat Dense::backward(const Mat& dy) {
  W.grad.noalias() += x_.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
  return dy * W.value.transpose();
}

SparseDense::SparseDense(std::string name, int in, int out) {
  W.name = name + ".W";
  b.name = name + ".b";
  W.resize(in, out);
  b.resize(1, out);
}

void SparseDense::init(Rng& rng, Init scheme) {
  init_param(W, scheme, rng);
  b.value.setZero();
}

Mat SparseDense::forward(const SpMat& x) {
  x_ = x;
  return forward_const(x);
}

Mat SparseDense::forward_const(const SpMat& x) const {
  if (x.cols() != W.value.rows()) throw ShapeError(W.name + ": input width mismatch");
  Mat y = x * W.value;
  y.rowwise() += b.value.row(0);
  return y;
}

void SparseDense::backward(const Mat& dy) {
  // Only rows of W touched by nonzero inputs receive gradient.
  for (Eigen::Index r = 0; r < x_.outerSize(); ++r) {
    for (SpMat::InnerIterator it(x_, r); it; ++it) {
      W.grad.row(it.col()) += it.value() * dy.row(r);
    }
  }
  b.grad.row(0) += dy.colwise().sum();
}

Embedding::Embedding(std::string name, int vocab, int dim) {
  table.name = name + ".table";
  table.resize(vocab, dim);
}

void Embedding::init(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 0.1);
  for (Eigen::Index j = 0; j < table.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < table.value.rows(); ++i) table.value(i, j) = dist(rng);
  }
}

Mat Embedding::forward(const std::vector<int>& ids) {
  ids_ = ids;
  return forward_const(ids);
}

Mat Embedding::forward_const(const std::vector<int>& ids) const {
  Mat out(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.value.rows()) {
      throw ShapeError(table.name + ": index " + std::to_string(ids[i]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  return out;
}

void Embedding::backward(const Mat& dy) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    table.grad.row(ids_[i]) += dy.row(static_cast<Eigen::Index>(i));
  }
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_backward(const Mat& dy, const Mat& y) {
  return (y.array() > 0.0).select(dy, 0.0);
}

Mat sigmoid(const Mat& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Mat Dropout::forward(const Mat& x, bool training, Rng& rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) mask_(i, j) = keep(rng) ? scale : 0.0;
  }
  return x.cwiseProduct(mask_);
}

Mat Dropout::backward(const Mat& dy) const {
  return active_ ? Mat(dy.cwiseProduct(mask_)) : dy;
}

double bce_with_logits(const Mat& logits, const Mat& targets, Reduction reduction,
                       Mat* grad) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("logits and targets differ in shape");
  }
  const double n_rows = static_cast<double>(std::max<Eigen::Index>(logits.rows(), 1));
  const double n_cells = static_cast<double>(std::max<Eigen::Index>(logits.size(), 1));
  const double scale = reduction == Reduction::kMean ? 1.0 / n_cells : 1.0 / n_rows;
  double loss = 0.0;
  if (grad) grad->resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double z = logits(i, j);
      const double y = targets(i, j);
      // max(z, 0) - z y + log(1 + exp(-|z|))
      loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      if (grad) {
        const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                : std::exp(z) / (1.0 + std::exp(z));
        (*grad)(i, j) = (p - y) * scale;
      }
    }
  }
  return loss * scale;
}

double logit_of_rate(double p) {
  p = std::clamp(p, 1e-4, 1.0 - 1e-4);
  return std::log(p / (1.0 - p));
}

void Adam::step(const ParamList& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    p->adam_m = config_.beta1 * p->adam_m + (1.0 - config_.beta1) * p->grad;
    p->adam_v = config_.beta2 * p->adam_v +
                (1.0 - config_.beta2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= config_.lr * (p->adam_m.array() / c1) /
                        ((p->adam_v.array() / c2).sqrt() + config_.eps);
  }
}

}  // namespace triage::neural

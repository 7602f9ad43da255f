#include "triage/neural/lstm.hpp"

#include "triage/error.hpp"

namespace triage::neural {

LstmCell::LstmCell(std::string name, int input, int hidden) : hidden_(hidden) {
  Wx.name = name + ".Wx";
  Wh.name = name + ".Wh";
  b.name = name + ".b";
  Wx.resize(input, 4 * hidden);
  Wh.resize(hidden, 4 * hidden);
  b.resize(1, 4 * hidden);
}

void LstmCell::init(Rng& rng) {
  init_param(Wx, Init::kGlorot, rng);
  init_param(Wh, Init::kGlorot, rng);
  b.value.setZero();
  b.value.block(0, hidden_, 1, hidden_).setOnes();
}

LstmCell::Step LstmCell::step(const Mat& x, const Mat& h, const Mat& c) const {
  const int H = hidden_;
  Mat z = x * Wx.value + h * Wh.value;
  z.rowwise() += b.value.row(0);
  Step s;
  s.x = x;
  s.h_prev = h;
  s.c_prev = c;
  s.i = sigmoid(z.middleCols(0, H));
  s.f = sigmoid(z.middleCols(H, H));
  s.g = z.middleCols(2 * H, H).array().tanh().matrix();
  s.o = sigmoid(z.middleCols(3 * H, H));
  s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh().matrix();
  return s;
}

Mat LstmCell::forward(const std::vector<Mat>& xs) {
  if (xs.empty()) throw ShapeError(Wx.name + ": empty sequence");
  const Eigen::Index batch = xs.front().rows();
  Mat h = Mat::Zero(batch, hidden_);
  Mat c = Mat::Zero(batch, hidden_);
  cache_.clear();
  cache_.reserve(xs.size());
  for (const Mat& x : xs) {
    if (x.cols() != Wx.value.rows() || x.rows() != batch) {
      throw ShapeError(Wx.name + ": step input has the wrong shape");
    }
    Step s = step(x, h, c);
    c = s.c;
    h = s.o.cwiseProduct(s.tanh_c);
    cache_.push_back(std::move(s));
  }
  return h;
}

Mat LstmCell::forward_const(const std::vector<Mat>& xs) const {
  if (xs.empty()) throw ShapeError(Wx.name + ": empty sequence");
  const Eigen::Index batch = xs.front().rows();
  Mat h = Mat::Zero(batch, hidden_);
  Mat c = Mat::Zero(batch, hidden_);
  for (const Mat& x : xs) {
    if (x.cols() != Wx.value.rows() || x.rows() != batch) {
      throw ShapeError(Wx.name + ": step input has the wrong shape");
    }
    Step s = step(x, h, c);
    c = s.c;
    h = s.o.cwiseProduct(s.tanh_c);
  }
  return h;
}

std::vector<Mat> LstmCell::backward(const Mat& dh_last) {
  const int H = hidden_;
  std::vector<Mat> dxs(cache_.size());
  Mat dh = dh_last;
  Mat dc = Mat::Zero(dh.rows(), H);
  for (std::size_t t = cache_.size(); t-- > 0;) {
    const Step& s = cache_[t];
    const Mat d_o = dh.cwiseProduct(s.tanh_c);
    dc += dh.cwiseProduct(s.o).cwiseProduct(
        (1.0 - s.tanh_c.array().square()).matrix());
    const Mat d_i = dc.cwiseProduct(s.g);
    const Mat d_g = dc.cwiseProduct(s.i);
    const Mat d_f = dc.cwiseProduct(s.c_prev);
    Mat dz(dh.rows(), 4 * H);
    dz.middleCols(0, H) = d_i.cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
    dz.middleCols(H, H) = d_f.cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
    dz.middleCols(2 * H, H) = d_g.cwiseProduct((1.0 - s.g.array().square()).matrix());
    dz.middleCols(3 * H, H) = d_o.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
    Wx.grad.noalias() += s.x.transpose() * dz;
    Wh.grad.noalias() += s.h_prev.transpose() * dz;
    b.grad.row(0) += dz.colwise().sum();
    dxs[t] = dz * Wx.value.transpose();
    dh = dz * Wh.value.transpose();
    dc = dc.cwiseProduct(s.f);
  }
  return dxs;
}

}  // namespace triage::neural

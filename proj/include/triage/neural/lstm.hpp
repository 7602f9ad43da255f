#pragma once

#include <string>
#include <vector>

#include "triage/neural/layers.hpp"

namespace triage::neural {

// Single-layer LSTM. Gate blocks are laid out [input, forget, cell, output]
// along the 4H axis:
//   z = x Wx + h Wh + b
//   i = s(z_i), f = s(z_f), g = tanh(z_g), o = s(z_o)
//   c' = f * c + i * g,  h' = o * tanh(c')
// The initial state is zero.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(std::string name, int input, int hidden);

  // Glorot weights; forget-gate bias 1.
  void init(Rng& rng);

  // xs[t] is (batch x input). Returns the final hidden state (batch x H).
  Mat forward(const std::vector<Mat>& xs);
  Mat forward_const(const std::vector<Mat>& xs) const;
  // Backpropagates dL/dh_T through time; returns dL/dx_t per step.
  std::vector<Mat> backward(const Mat& dh_last);

  ParamList params() { return {&Wx, &Wh, &b}; }
  int hidden() const { return hidden_; }
  int input() const { return static_cast<int>(Wx.value.rows()); }

  Param Wx;  // input x 4H
  Param Wh;  // H x 4H
  Param b;   // 1 x 4H

 private:
  struct Step {
    Mat x, h_prev, c_prev, i, f, g, o, c, tanh_c;
  };
  Step step(const Mat& x, const Mat& h, const Mat& c) const;

  int hidden_ = 0;
  std::vector<Step> cache_;
};

}  // namespace triage::neural

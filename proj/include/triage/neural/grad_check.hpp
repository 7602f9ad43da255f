#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "triage/neural/layers.hpp"

namespace triage::neural {

// A differentiable component with everything it needs to be evaluated.
struct GradCheckTarget {
  std::string name;
  ParamList params;
  std::function<double()> loss;             // forward only
  std::function<void()> compute_gradients;  // zeroes, then backpropagates
  std::shared_ptr<void> owner;              // keeps the component alive
};

// Max over parameter entries of |g - g_fd| / max(|g|, |g_fd|, 1e-8), where g_fd
// is the central difference with step epsilon. 0 when there are no
// parameters. `max_entries` > 0 checks only that many entries per parameter,
// evenly spaced.
double gradient_check(const GradCheckTarget& target, double epsilon = 1e-5,
                      std::size_t max_entries = 0);

// Components covered by the standard check: a dense layer with BCE, one LSTM
// step, an eight-step LSTM rollout, the history encoder, the skip trunk in
// both skip modes, and the full assessment model through each head.
std::vector<GradCheckTarget> standard_grad_check_targets(std::uint64_t seed);

}  // namespace triage::neural

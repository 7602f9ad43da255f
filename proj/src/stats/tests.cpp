#include "triage/stats/tests.hpp"

#include <cmath>

namespace triage::stats {

double sign_test_p(int wins, int losses) {
  const int n = wins + losses;
  if (n <= 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

}  // namespace triage::stats

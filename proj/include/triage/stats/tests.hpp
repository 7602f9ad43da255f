#pragma once

namespace triage::stats {

// One-sided exact sign test: P[X >= wins] for X ~ Binomial(wins + losses,
// 1/2). Ties are excluded by the caller.
double sign_test_p(int wins, int losses);

}  // namespace triage::stats

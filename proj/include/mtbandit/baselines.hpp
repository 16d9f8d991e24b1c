#pragma once

#include "mtbandit/repbai.hpp"
#include "mtbandit/repbpi.hpp"

namespace mtbandit {

/// Independent per-task phased G-optimal elimination in the full dimension:
/// eli_low_rep with B̂ = I_d, k → d, and confidence δ/M per task.
BaiResult ind_rage(LinearEnvironment& env, const RunConfig& config);

/// Independent per-task reward-free uncertainty sampling: est_low_rep with
/// B̂ = I_d and N = ⌈scale_N·(d² + γdL_θ²)/ε²·log⁴(γdL_θ/(ε·δ/M))⌉.
BpiResult ind_rf_linucb(ContextualEnvironment& env, const RunConfig& config);

}  // namespace mtbandit

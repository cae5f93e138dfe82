#pragma once

#include <cstdint>
#include <functional>

#include "cgmm/sim.hpp"

namespace cgmm {

/// log f(y | x) evaluated pointwise.
using LogDensity = std::function<double(const Vector& x, const Vector& y)>;

struct KlEstimate {
  double kl = 0.0;
  double se = 0.0;
  Index clipped = 0;  // draws whose log-density was non-finite or below the floor
};

/// Monte Carlo estimate of E[log f_true - log f_fit] over the supplied draws,
/// which must come from f_true.
KlEstimate kl_estimate(const Matrix& xs, const Matrix& ys, const LogDensity& log_true,
                       const LogDensity& log_fit, double log_floor = -700.0);

struct KlReport {
  KlEstimate a;
  KlEstimate b;
  Index draws = 0;
};

/// Draws `m_draws` fresh (x, y) pairs from the model in `spec` and estimates
/// the conditional KL divergence from the true density to `a` and `b`.
/// Only models with a closed-form density (M1-M4) are supported.
KlReport kl_diagnostic(const SimModelSpec& spec, const LogDensity& a, const LogDensity& b,
                       Index m_draws, std::uint64_t seed);

}  // namespace cgmm

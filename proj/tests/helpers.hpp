#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "cgmm/model.hpp"

namespace testutil {

using cgmm::Dataset;
using cgmm::Index;
using cgmm::Mask;
using cgmm::Matrix;
using cgmm::Vector;

inline Matrix random_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  }
  return m;
}

inline Matrix random_spd(Index p, std::mt19937_64& rng) {
  const Matrix a = random_normal(p, p, rng);
  return a * a.transpose() + 0.5 * Matrix::Identity(p, p);
}

inline Matrix with_intercept(const Matrix& x) {
  Matrix z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

// Ordinary least squares on [1, x] with the MLE residual covariance (divisor n).
inline std::pair<Matrix, Matrix> ols(const Matrix& x, const Matrix& y) {
  const Matrix z = with_intercept(x);
  const Matrix b = (z.transpose() * z).ldlt().solve(z.transpose() * y);
  const Matrix r = y - z * b;
  return {b, r.transpose() * r / static_cast<double>(x.rows())};
}

// Gaussian linear model y = [1, x] B + e, e ~ N(0, S), with each response
// cell missing independently with probability `missing`.
inline Dataset linear_data(Index n, Index q, Index p, std::uint64_t seed, double missing = 0.0) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.x = random_normal(n, q, rng);
  const Matrix b = random_normal(q + 1, p, rng);
  const Matrix chol = random_spd(p, rng).llt().matrixL();
  d.y = with_intercept(d.x) * b + random_normal(n, p, rng) * chol.transpose();
  d.delta = Mask::Constant(n, p, true);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (u(rng) < missing) {
        d.delta(i, j) = false;
        d.y(i, j) = std::nan("");
      }
    }
  }
  return d;
}

// Two well-separated regression regimes for scalar y whose membership
// depends on x1 through a logistic gate.
inline Dataset two_regime_data(Index n, Index q, std::uint64_t seed, double missing = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset d;
  d.x = random_normal(n, q, rng);
  d.y.resize(n, 1);
  d.delta = Mask::Constant(n, 1, true);
  for (Index i = 0; i < n; ++i) {
    const double p2 = 1.0 / (1.0 + std::exp(-(0.3 + 1.5 * d.x(i, 0))));
    const bool second = u(rng) < p2;
    const double mean = second ? -3.0 + 0.5 * d.x(i, 0) : 3.0 + 2.0 * d.x(i, 0);
    d.y(i, 0) = mean + (second ? 0.7 : 0.5) * z(rng);
    if (u(rng) < missing) {
      d.delta(i, 0) = false;
      d.y(i, 0) = std::nan("");
    }
  }
  return d;
}

// Mixed-pattern multivariate data from a two-component CGMM.
inline Dataset mixed_missing_data(Index n, Index q, Index p, std::uint64_t seed, double missing) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.x = random_normal(n, q, rng);
  const Matrix b1 = random_normal(q + 1, p, rng);
  const Matrix b2 = random_normal(q + 1, p, rng).array() + 2.0;
  const Matrix c1 = random_spd(p, rng).llt().matrixL();
  const Matrix c2 = random_spd(p, rng).llt().matrixL();
  const Matrix e = random_normal(n, p, rng);
  d.y.resize(n, p);
  d.delta = Mask::Constant(n, p, true);
  for (Index i = 0; i < n; ++i) {
    const bool second = u(rng) < 1.0 / (1.0 + std::exp(-d.x(i, 0)));
    Vector zrow(q + 1);
    zrow << 1.0, d.x.row(i).transpose();
    if (second) {
      d.y.row(i) = (b2.transpose() * zrow + c2 * e.row(i).transpose()).transpose();
    } else {
      d.y.row(i) = (b1.transpose() * zrow + c1 * e.row(i).transpose()).transpose();
    }
    for (Index j = 0; j < p; ++j) {
      if (u(rng) < missing) {
        d.delta(i, j) = false;
        d.y(i, j) = std::nan("");
      }
    }
  }
  return d;
}

}  // namespace testutil

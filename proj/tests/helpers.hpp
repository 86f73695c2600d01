#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "drgate/data.hpp"
#include "drgate/learners.hpp"
#include "drgate/rng.hpp"

namespace testing {

inline Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  drgate::Rng rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd normal_vector(Eigen::Index n, std::uint64_t seed) { return normal_matrix(n, 1, seed).col(0); }

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline drgate::learn::LearnerSpec spec_of(drgate::learn::LearnerKind kind) {
  drgate::learn::LearnerSpec s;
  s.kind = kind;
  return s;
}

/// A small dataset with alternating treatment.
inline drgate::Dataset toy_dataset(std::size_t n, std::size_t p, std::uint64_t seed) {
  Eigen::MatrixXd x = normal_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), seed);
  Eigen::VectorXd d(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = i % 2;
  Eigen::VectorXd y = x.col(0) + d + 0.1 * normal_vector(static_cast<Eigen::Index>(n), seed + 99);
  return drgate::Dataset(y, d, x, {0});
}

}  // namespace testing

#pragma once

// Exact t-SNE (O(N^2) memory and time), adequate for a few thousand points.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "padbench/error.hpp"
#include "padbench/rng.hpp"

namespace padbench {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 0.0;  // 0 picks max(n / early_exaggeration / 4, 50)
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 0;
};

using Point2 = std::array<double, 2>;

namespace detail {

// Row-conditional affinities P(j|i) with per-row precision tuned so that
// exp(entropy) matches the perplexity.
inline Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const auto n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    Eigen::VectorXd row(n);
    for (int iter = 0; iter < 200; ++iter) {
      double min_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) min_d = std::min(min_d, sq_dist(i, j));
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (sq_dist(i, j) - min_d));
        sum += row(j);
        weighted += row(j) * (sq_dist(i, j) - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

}  // namespace detail

// Rows of `features` are samples. Requires at least 3 * perplexity rows.
inline std::vector<Point2> tsne_project(const Eigen::MatrixXd& features, const TsneOptions& o = {}) {
  const auto n = features.rows();
  if (!(o.perplexity > 0.0)) throw domain_error("perplexity must be positive");
  if (static_cast<double>(n) < 3.0 * o.perplexity)
    throw domain_error("t-SNE with perplexity " + std::to_string(o.perplexity) + " needs at least " +
                       std::to_string(static_cast<int>(std::ceil(3.0 * o.perplexity))) + " samples, got " +
                       std::to_string(n));
  if (o.iterations < 1) throw domain_error("t-SNE needs at least one iteration");
  if (!features.allFinite()) throw domain_error("t-SNE input contains non-finite values");

  const Eigen::VectorXd norms = features.rowwise().squaredNorm();
  Eigen::MatrixXd sq = (-2.0 * features * features.transpose()).colwise() + norms;
  sq.rowwise() += norms.transpose();
  sq = sq.cwiseMax(0.0);

  Eigen::MatrixXd p = detail::conditional_affinities(sq, o.perplexity);
  p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));  // eval: transpose aliases p
  p = p.cwiseMax(1e-12);

  const double eta =
      o.learning_rate > 0.0 ? o.learning_rate
                            : std::max(static_cast<double>(n) / o.early_exaggeration / 4.0, 50.0);

  Rng rng(mix_seed(o.seed, 0x75e));
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int d = 0; d < 2; ++d) y(i, d) = rng.normal(0.0, 1e-4);
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n), grad(n, 2);

  for (int iter = 0; iter < o.iterations; ++iter) {
    const double exaggeration = iter < o.exaggeration_iterations ? o.early_exaggeration : 1.0;
    const double momentum = iter < o.exaggeration_iterations ? 0.5 : 0.8;
    if (iter == o.exaggeration_iterations) {
      // gains built up under exaggeration overshoot once it is switched off
      velocity.setZero();
      gains.setOnes();
    }

    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = v;
        z += v;
      }
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num(i, j) / z, 1e-12);
        const double w = (exaggeration * p(i, j) - q) * num(i, j);
        grad.row(i) += 4.0 * w * (y.row(i) - y.row(j));
      }

    for (Eigen::Index i = 0; i < n; ++i)
      for (int d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0) == (velocity(i, d) > 0);
        gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
        velocity(i, d) = momentum * velocity(i, d) - eta * gains(i, d) * grad(i, d);
        y(i, d) += velocity(i, d);
      }
    const Eigen::RowVector2d mean = y.colwise().mean();
    y.rowwise() -= mean;
  }

  std::vector<Point2> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = {y(i, 0), y(i, 1)};
  return out;
}

}  // namespace padbench

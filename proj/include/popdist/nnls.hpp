#pragma once

// Lawson-Hanson active-set solver for min ||A x - b||_2 subject to x >= 0.

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace popdist::nnls {

struct Result {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
};

/// `tolerance` is absolute on the dual A'(b - Ax): heavily weighted rows must not mask small gradients.
inline Result solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tolerance = 1e-12,
                    int max_iterations = -1) {
  const Eigen::Index n = a.cols();
  if (max_iterations < 0) max_iterations = static_cast<int>(3 * n + 50);
  Result out;
  out.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[j]) idx.push_back(j);
    Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Eigen::Index>(k));
    return idx;
  };

  Eigen::VectorXd w = a.transpose() * (b - a * out.x);
  while (out.iterations < max_iterations) {
    Eigen::Index enter = -1;
    double best = tolerance;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) {
      out.converged = true;
      break;
    }
    passive[enter] = true;

    Eigen::VectorXd z;
    while (true) {
      ++out.iterations;
      const auto idx = solve_passive(z);
      bool all_positive = true;
      for (auto j : idx) all_positive = all_positive && z(j) > 0.0;
      if (all_positive) {
        out.x = z;
        break;
      }
      // step back toward the previous feasible point until a passive variable hits zero
      double alpha = std::numeric_limits<double>::infinity();
      for (auto j : idx) {
        if (z(j) <= 0.0) alpha = std::min(alpha, out.x(j) / (out.x(j) - z(j)));
      }
      out.x += alpha * (z - out.x);
      for (auto j : idx) {
        if (out.x(j) <= tolerance) {
          passive[j] = false;
          out.x(j) = 0.0;
        }
      }
      if (out.iterations >= max_iterations) return out;
    }
    w = a.transpose() * (b - a * out.x);
  }
  return out;
}

}  // namespace popdist::nnls

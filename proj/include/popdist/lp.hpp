#pragma once

// Dense two-phase simplex for small linear programs in standard form
//
//   minimize c'x  subject to  A x = b,  x >= 0.
//
// Sizes here are a few dozen rows by at most a couple of thousand columns, so a
// full tableau is the simplest thing that works. The default pivot rule is
// Dantzig's (most negative reduced cost, lowest index on ties) and drops to
// Bland's smallest-index rule while pivots are degenerate, which rules out
// cycling. Leaving ties go to the smallest basic index. The returned vertex is
// a deterministic function of the input.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "popdist/error.hpp"

namespace popdist::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

/// `dantzig` falls back to Bland after `degenerate_switch` consecutive degenerate pivots.
enum class PivotRule { bland, dantzig };

struct Options {
  double tolerance = 1e-9;
  double pivot_tolerance = 1e-11;
  int max_iterations = 200000;
  PivotRule rule = PivotRule::dantzig;
  int degenerate_switch = 20;
};

struct Problem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

struct Solution {
  Status status = Status::iteration_limit;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(const Problem& p, const Options& opt)
      : rows_(static_cast<int>(p.A.rows())), cols_(static_cast<int>(p.A.cols())), opt_(opt) {
    // columns: [originals | artificials | rhs]; rows with negative rhs are negated
    original_ = Matrix::Zero(rows_, cols_ + rows_ + 1);
    for (int i = 0; i < rows_; ++i) {
      const double sign = p.b(i) < 0.0 ? -1.0 : 1.0;
      original_.row(i).head(cols_) = sign * p.A.row(i);
      original_(i, cols_ + i) = 1.0;
      original_(i, rhs()) = sign * p.b(i);
    }
    t_ = Matrix::Zero(rows_ + 1, cols_ + rows_ + 1);
    t_.topRows(rows_) = original_;
    basis_.resize(rows_);
    for (int i = 0; i < rows_; ++i) basis_[i] = cols_ + i;
    redundant_.assign(rows_, false);
    cost_ = Eigen::VectorXd::Zero(cols_ + rows_);
  }

  Status run(const Eigen::VectorXd& c, int& iterations) {
    // Phase 1: minimize the sum of artificials.
    cost_.setZero();
    cost_.tail(rows_).setOnes();
    price();
    Status s = iterate(cols_ + rows_, iterations);
    if (s != Status::optimal) return s;
    double scale = 1.0;
    for (int i = 0; i < rows_; ++i) scale = std::max(scale, std::abs(original_(i, rhs())));
    if (-t_(rows_, rhs()) > opt_.tolerance * scale) return Status::infeasible;
    drive_out_artificials();

    // Phase 2 over original columns only.
    cost_.setZero();
    cost_.head(cols_) = c;
    price();
    return iterate(cols_, iterations);
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols_);
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < cols_) x(basis_[i]) = std::max(0.0, t_(i, rhs()));
    }
    return x;
  }

  std::vector<int> basic_columns() const {
    std::vector<int> out;
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < cols_ && !redundant_[i]) out.push_back(basis_[i]);
    }
    return out;
  }

 private:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  static constexpr int kRefactorInterval = 50;

  int rhs() const { return cols_ + rows_; }

  // Objective row: reduced costs cost - c_B' B^-1 A, and -c_B' x_B in the rhs slot.
  void price() {
    t_.row(rows_).setZero();
    t_.row(rows_).head(cols_ + rows_) = cost_.transpose();
    for (int i = 0; i < rows_; ++i) {
      const double cb = cost_(basis_[i]);
      if (cb != 0.0) t_.row(rows_) -= cb * t_.row(i);
    }
  }

  // Rebuild B^-1 [A | I | b] from the original data to shed accumulated rounding.
  void refactor() {
    Eigen::MatrixXd basis_matrix(rows_, rows_);
    for (int i = 0; i < rows_; ++i) basis_matrix.col(i) = original_.col(basis_[i]);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);
    if (!lu.isInvertible()) return;
    t_.topRows(rows_) = lu.solve(Eigen::MatrixXd(original_));
    for (int i = 0; i < rows_; ++i) {
      t_.row(i).head(cols_ + rows_) = t_.row(i).head(cols_ + rows_).unaryExpr([](double v) {
        return std::abs(v) < 1e-14 ? 0.0 : v;
      });
    }
    price();
  }

  void pivot(int r, int col) {
    const double inv = 1.0 / t_(r, col);
    t_.row(r) *= inv;
    t_(r, col) = 1.0;
    for (int i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = t_(i, col);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(r);
        t_(i, col) = 0.0;
      }
    }
    basis_[r] = col;
  }

  int choose_entering(int limit, bool bland) const {
    // most negative reduced cost below the entering threshold (first one under Bland)
    const double threshold = -opt_.tolerance * 1e-2;
    int best = -1;
    double best_value = threshold;
    for (int j = 0; j < limit; ++j) {
      const double d = t_(rows_, j);
      if (d < threshold) {
        if (bland) return j;
        if (d < best_value) {
          best_value = d;
          best = j;
        }
      }
    }
    return best;
  }

  // Minimum ratio; ties go to the smallest basic index under Bland, otherwise to
  // the largest pivot element.
  int choose_leaving(int col, bool bland) const {
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows_; ++i) {
      if (redundant_[i]) continue;
      const double a = t_(i, col);
      if (a <= opt_.pivot_tolerance) continue;
      const double ratio = std::max(0.0, t_(i, rhs())) / a;
      const double tie = 1e-12 * std::max(1.0, best_ratio);
      if (best < 0 || ratio < best_ratio - tie) {
        best_ratio = ratio;
        best = i;
      } else if (std::abs(ratio - best_ratio) <= tie) {
        const bool better = bland ? basis_[i] < basis_[best] : a > t_(best, col);
        if (better) {
          best_ratio = std::min(ratio, best_ratio);
          best = i;
        }
      }
    }
    return best;
  }

  Status iterate(int limit, int& iterations) {
    int degenerate_run = 0;
    int since_refactor = 0;
    while (true) {
      const bool bland = opt_.rule == PivotRule::bland || degenerate_run >= opt_.degenerate_switch;
      int col = choose_entering(limit, bland);
      if (col < 0 && since_refactor > 0) {
        // confirm optimality on a freshly factored tableau
        refactor();
        since_refactor = 0;
        col = choose_entering(limit, bland);
      }
      if (col < 0) return Status::optimal;
      const int row = choose_leaving(col, bland);
      if (row < 0) return Status::unbounded;
      const bool degenerate = t_(row, rhs()) <= 1e-12;
      pivot(row, col);
      degenerate_run = degenerate ? degenerate_run + 1 : 0;
      if (++since_refactor >= kRefactorInterval) {
        refactor();
        since_refactor = 0;
      }
      if (++iterations >= opt_.max_iterations) return Status::iteration_limit;
    }
  }

  void drive_out_artificials() {
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < cols_) continue;
      int best = -1;
      for (int j = 0; j < cols_ && best < 0; ++j) {
        if (std::abs(t_(i, j)) > 1e-9) best = j;
      }
      if (best >= 0) {
        pivot(i, best);
      } else {
        redundant_[i] = true;
      }
    }
  }

  int rows_;
  int cols_;
  Options opt_;
  Matrix original_;
  Matrix t_;
  Eigen::VectorXd cost_;
  std::vector<int> basis_;
  std::vector<bool> redundant_;
};

// Recompute the basic solution from the original data; the tableau accumulates
// rounding over many pivots.
inline Eigen::VectorXd refine(const Problem& p, const std::vector<int>& basic, const Eigen::VectorXd& x0) {
  if (basic.empty()) return x0;
  Eigen::MatrixXd ab(p.A.rows(), static_cast<Eigen::Index>(basic.size()));
  for (std::size_t k = 0; k < basic.size(); ++k) ab.col(static_cast<Eigen::Index>(k)) = p.A.col(basic[k]);
  const Eigen::VectorXd xb = ab.colPivHouseholderQr().solve(p.b);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.A.cols());
  for (std::size_t k = 0; k < basic.size(); ++k) x(basic[k]) = xb(static_cast<Eigen::Index>(k));
  if (x.minCoeff() < -1e-9 || !x.allFinite()) return x0;
  const double r_new = (p.A * x.cwiseMax(0.0) - p.b).lpNorm<Eigen::Infinity>();
  const double r_old = (p.A * x0 - p.b).lpNorm<Eigen::Infinity>();
  return r_new <= r_old ? Eigen::VectorXd(x.cwiseMax(0.0)) : x0;
}

}  // namespace detail

inline Solution solve(const Problem& p, const Options& opt = {}) {
  popdist::detail::require(p.A.rows() == p.b.size() && p.A.cols() == p.c.size(), "lp::solve: inconsistent sizes");
  Solution out;
  out.x = Eigen::VectorXd::Zero(p.A.cols());
  detail::Tableau tableau(p, opt);
  out.status = tableau.run(p.c, out.iterations);
  if (out.status == Status::optimal) {
    out.x = detail::refine(p, tableau.basic_columns(), tableau.primal());
    out.objective = p.c.dot(out.x);
  }
  return out;
}

}  // namespace popdist::lp

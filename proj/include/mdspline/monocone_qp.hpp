#pragma once

// Quadratic programs over the monotone cone
//   Upsilon = {(gu, gd) : gu nondecreasing, gd nonincreasing}
// with objective
//   ||y - B(gu+gd)||^2 + mu ||B(gu-gd)||^2 + lambda (gu+gd)' Omega (gu+gd),
// plus the unconstrained least-squares and smoothing-spline baselines.

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mdspline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ConeQpProblem {
  MatrixXd B;
  MatrixXd Omega;  // J x J; zero matrix (or empty) for plain cubic splines
  VectorXd y;
  double mu = 0.0;
  double lambda = 0.0;

  void validate() const;
};

struct ConePair {
  VectorXd gamma_u;
  VectorXd gamma_d;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  /// Objective after every accepted step, starting with the warm start.
  std::vector<double> objective_history;
};

struct ConeQpOptions {
  int max_iterations = 10000;
  /// Converged when the KKT residual is at most kkt_tol * (1 + ||B'y||).
  double kkt_tol = 1e-7;
  /// Feasible starting pair; defaults to sequence_decompose of the
  /// unconstrained (or smoothing-spline) coefficients.
  std::optional<std::pair<VectorXd, VectorXd>> warm_start;
};

/// Sufficient statistics of the objective. B'B and Omega are banded for
/// B-spline bases; the solver only touches entries inside the band.
class ConeQpGram {
 public:
  ConeQpGram(const MatrixXd& B, const MatrixXd& Omega);

  /// Replaces the response; B'y and y'y are recomputed.
  void set_response(const MatrixXd& B, const VectorXd& y);

  int basis_size() const noexcept { return static_cast<int>(K_.rows()); }
  int bandwidth() const noexcept { return band_; }
  const MatrixXd& gram() const noexcept { return K_; }
  const MatrixXd& omega() const noexcept { return Omega_; }
  /// Penalty in increment coordinates, L' Omega L with L the cumulative-sum
  /// map, and its bandwidth.
  const MatrixXd& omega_increments() const noexcept { return OmegaZ_; }
  int omega_increments_bandwidth() const noexcept { return bandZ_; }
  const VectorXd& Bty() const noexcept { return Bty_; }
  double yty() const noexcept { return yty_; }

 private:
  MatrixXd K_;
  MatrixXd Omega_;
  MatrixXd OmegaZ_;
  int bandZ_ = 0;
  VectorXd Bty_;
  double yty_ = 0.0;
  int band_ = 0;
};

/// Least-squares coefficients (B'B)^{-1} B'y. Throws SingularDesign when B
/// is column-rank deficient.
VectorXd solve_ls(const MatrixXd& B, const VectorXd& y);

/// Penalized coefficients (B'B + lambda Omega)^{-1} B'y.
VectorXd solve_smoothing(const MatrixXd& B, const MatrixXd& Omega, const VectorXd& y,
                         double lambda);

/// Splits gamma into a nondecreasing and a nonincreasing part that sum to
/// gamma: gu_1 = gamma_1, gd_1 = 0 and increments go to the matching side.
std::pair<VectorXd, VectorXd> sequence_decompose(const VectorXd& gamma);

/// Objective value evaluated directly from B (no Gram cancellation).
double cone_objective(const ConeQpProblem& prob, const VectorXd& gamma_u,
                      const VectorXd& gamma_d);

ConePair solve_cone_qp(const ConeQpProblem& prob, const ConeQpOptions& opts = {});

/// Solver entry point for repeated solves that share B and Omega. Without a
/// warm start in opts, starts from the decomposed smoothing-spline solution.
ConePair solve_cone_qp(const ConeQpGram& gram, double mu, double lambda,
                       const ConeQpOptions& opts);

}  // namespace mdspline

#pragma once

// Cross-validated selection of (J, mu) for MDCS and (lambda, mu) for MDSS,
// plus the cubic- and smoothing-spline baselines they are compared with.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdspline/decomposition.hpp"
#include "mdspline/splinebasis.hpp"

namespace mdspline {

struct CvGrid {
  std::vector<double> mu_values;
  std::vector<int> J_values;
  std::vector<double> lambda_values;
  std::vector<double> k_values;
  /// Number of folds; 0 means leave-one-out (folds = n).
  int folds = 0;

  /// mu: 10 log-spaced in [1e-6, 1e2]; lambda: 10 log-spaced in [1e-8, 1e1];
  /// J: 4..min(50, n/2) step 2; k: 0.05..1 step 0.05; leave-one-out for
  /// n <= 300, 10 folds above.
  static CvGrid defaults(int n);

  /// Effective number of folds for n observations.
  int fold_count(int n) const noexcept { return folds == 0 ? n : folds; }
};

enum class CsStrategy { FixJThenMu, JointJMu };
enum class SsStrategy { FixLambdaThenMu, ShrinkageFactor, JointLambdaMu };

std::string_view to_string(CsStrategy s);
std::string_view to_string(SsStrategy s);

struct CvCell {
  int J = 0;
  double lambda = 0.0;
  double mu = 0.0;
  double error = 0.0;  // mean squared held-out error; NaN when failed
  bool failed = false;
};

/// Mean CV error over a two-axis grid, stored row-major.
struct CvSurface {
  std::string row_axis;
  std::string col_axis;
  std::vector<double> row_values;
  std::vector<double> col_values;
  std::vector<CvCell> cells;
  std::size_t argmin = 0;

  std::size_t rows() const noexcept { return row_values.size(); }
  std::size_t cols() const noexcept { return col_values.size(); }
  const CvCell& at(std::size_t r, std::size_t c) const { return cells.at(r * cols() + c); }
  const CvCell& best() const { return cells.at(argmin); }

  /// One row per cell: row/col axis values, J, lambda, mu, cv_error, status.
  std::string to_tsv() const;
};

/// Unconstrained spline fit (cubic regression spline or smoothing spline).
struct SplineFit {
  KnotVector knots;
  VectorXd gamma;
  Method method = Method::MDCS;
  double lambda = 0.0;

  VectorXd eval(std::span<const double> t) const { return eval_spline(knots, gamma, t); }
};

struct TuneOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  /// Options for the per-fold fits; closed-form refinement is skipped
  /// there since it does not change predictions beyond solver tolerance.
  FitOptions cv_fit = [] {
    FitOptions o;
    o.refine_closed_form = false;
    return o;
  }();
  /// Options for the final refit on all data.
  FitOptions final_fit;
  /// Predict held-out points outside a training fold's range at the
  /// nearest boundary instead of failing.
  bool clamp = true;
};

struct TuneResult {
  CvSurface surface;
  /// First-stage surface of two-stage strategies (J or lambda of the
  /// unconstrained spline).
  std::optional<CvSurface> baseline;
  DecompositionFit fit;
};

struct BaselineResult {
  CvSurface surface;
  SplineFit fit;
};

using Predictor = std::function<VectorXd(std::span<const double>)>;
using FitClosure = std::function<Predictor(std::span<const double> x, const VectorXd& y)>;

/// Fold label in [0, folds) for each observation. Leave-one-out when
/// folds == n; otherwise a seeded shuffle dealt round-robin, so fold sizes
/// differ by at most one.
std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed);

/// Mean squared held-out prediction error of `fit` over the folds.
double cv_error(std::span<const double> x, const VectorXd& y, const FitClosure& fit, int folds,
                std::uint64_t seed, bool clamp = true);

BaselineResult tune_cubic_spline(std::span<const double> x, const VectorXd& y,
                                 const CvGrid& grid, const TuneOptions& opts = {});
BaselineResult tune_smoothing_spline(std::span<const double> x, const VectorXd& y,
                                     const CvGrid& grid, const TuneOptions& opts = {});

TuneResult tune_mdcs(std::span<const double> x, const VectorXd& y, const CvGrid& grid,
                     CsStrategy strategy, const TuneOptions& opts = {});
TuneResult tune_mdss(std::span<const double> x, const VectorXd& y, const CvGrid& grid,
                     SsStrategy strategy, const TuneOptions& opts = {});

}  // namespace mdspline

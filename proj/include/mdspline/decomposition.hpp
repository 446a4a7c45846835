#pragma once

// Monotone decomposition f = f_up + f_down fitted with cubic splines
// (MDCS, fixed J) or smoothing splines (MDSS, knots at the data), the
// closed-form solutions for monotone fits, and tie-group bookkeeping.

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdspline/monocone_qp.hpp"
#include "mdspline/splinebasis.hpp"

namespace mdspline {

enum class Method { MDCS, MDSS };
enum class FitSource { Solver, ClosedForm };

std::string_view to_string(Method m);
std::string_view to_string(FitSource s);

/// Maximal runs of tied coefficients. Runs are 0-based inclusive index
/// ranges that partition 0..J-1 in order.
struct TieGroups {
  std::vector<std::pair<int, int>> runs;

  int g() const noexcept { return static_cast<int>(runs.size()); }
  int size() const noexcept { return runs.empty() ? 0 : runs.back().second + 1; }

  /// g x J aggregation matrix: row k has ones on the columns of run k, so
  /// G' 1_g = 1_J and G' beta expands group values to coefficients.
  MatrixXd aggregation_matrix() const;
};

/// Groups gamma into runs whose values stay within eps of the run's first
/// element. gamma must be nondecreasing or nonincreasing within eps.
TieGroups detect_ties(const VectorXd& gamma, double eps);

/// Tie tolerance used for detection and snapping: 1e-6 times the largest
/// coefficient magnitude of the pair.
double tie_tolerance(const VectorXd& gamma_u, const VectorXd& gamma_d);

/// Replaces every tied run by its mean. Monotonicity is preserved.
VectorXd snap_ties(const VectorXd& gamma, const TieGroups& groups);

struct DecompositionFit {
  KnotVector knots;
  VectorXd gamma_u;
  VectorXd gamma_d;
  double mu = 0.0;
  double lambda = 0.0;
  Method method = Method::MDCS;
  FitSource source = FitSource::Solver;
  VectorXd fitted{};  // B (gamma_u + gamma_d) at the training x
  /// Common level c of the flat component when one component is constant;
  /// equals the mean of the other component's fitted values.
  std::optional<double> c_offset{};

  // diagnostics
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  int n = 0;
  int distinct_x = 0;
  bool knots_capped = false;  // MDSS only: knots thinned to the interior cap

  int basis_size() const noexcept { return knots.size(); }
};

struct FitOptions {
  ConeQpOptions solver;
  /// Snap near-equal coefficients to their run mean after solving.
  bool snap_ties = true;
  /// When one component comes out flat, recompute the pair from the
  /// closed form on the detected tie pattern and keep it if it is feasible
  /// and not worse.
  bool refine_closed_form = true;
};

/// Basis, penalty and Gram matrix for one set of abscissae, reusable for
/// many responses and hyperparameters (cross-validation, bootstrap).
class Decomposer {
 public:
  /// MDCS basis with J functions on quantile knots.
  static Decomposer cubic(std::span<const double> x, int J);
  /// MDSS basis with knots at the distinct data values (capped).
  static Decomposer smoothing(std::span<const double> x, int max_interior = 200);

  Decomposer(Method method, KnotVector knots, std::span<const double> x);

  Method method() const noexcept { return method_; }
  const KnotVector& knots() const noexcept { return knots_; }
  const MatrixXd& B() const noexcept { return design_.B; }
  const MatrixXd& Omega() const noexcept { return design_.Omega; }
  const std::vector<double>& x() const noexcept { return design_.xs; }
  int n() const noexcept { return static_cast<int>(design_.B.rows()); }
  int basis_size() const noexcept { return knots_.size(); }
  bool knots_capped() const noexcept { return capped_; }

  /// Monotone decomposition at (mu, lambda). lambda must be 0 for MDCS.
  DecompositionFit fit(const VectorXd& y, double mu, double lambda,
                       const FitOptions& opts = {}) const;

  /// Unpenalized (MDCS, lambda = 0) or smoothing-spline coefficients.
  VectorXd baseline(const VectorXd& y, double lambda = 0.0) const;

 private:
  Method method_;
  KnotVector knots_;
  DesignPair design_;
  ConeQpGram gram_;
  int distinct_ = 0;
  bool capped_ = false;
};

DecompositionFit fit_mdcs(std::span<const double> x, const VectorXd& y, int J, double mu,
                          const FitOptions& opts = {});
DecompositionFit fit_mdss(std::span<const double> x, const VectorXd& y, double lambda,
                          double mu, const FitOptions& opts = {});

/// Monotone-case closed form for cubic splines: gamma_d = c 1 and
///   gamma_u = G'(G B'B G')^{-1} G B'y / (1+mu) + (mu-1)/(mu+1) c 1,
/// with c = 1'B gamma_u / n solved exactly.
std::pair<VectorXd, VectorXd> closed_form_cs(const MatrixXd& B, const VectorXd& y, double mu,
                                             const MatrixXd& G);

/// Smoothing-spline version with M = (1+mu) G K G' + lambda G Omega G':
///   gamma_u = G' M^{-1} G B'y - c G' M^{-1} ((1-mu) G K G' + lambda G Omega G') 1_g.
std::pair<VectorXd, VectorXd> closed_form_ss(const MatrixXd& B, const MatrixXd& Omega,
                                             const VectorXd& y, double lambda, double mu,
                                             const MatrixXd& G);

struct Prediction {
  VectorXd f;
  VectorXd f_up;
  VectorXd f_down;
};

Prediction predict(const DecompositionFit& fit, std::span<const double> t);

nlohmann::json to_json(const DecompositionFit& fit);
DecompositionFit fit_from_json(const nlohmann::json& j);

}  // namespace mdspline

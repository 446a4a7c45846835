#pragma once

// Test functions used by the simulations: fixed named curves and random
// functions drawn from Gaussian processes with SE, RQ, Matern or periodic
// covariance. Both are addressable by short string labels such as "x3",
// "bowman-0.45", "ghosal-m2", "SE-0.1", "Mat32-1" or "Periodic-0.1-4".

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include <Eigen/Dense>

namespace mdspline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KernelFamily { SE, RQ, Matern, Periodic };

struct KernelSpec {
  KernelFamily family = KernelFamily::SE;
  double ell = 1.0;
  double nu = 0.0;     // Matern only: 0.5, 1.5 or 2.5
  double alpha = 0.0;  // RQ only
  double T = 0.0;      // Periodic only

  void validate() const;
  /// Covariance at distance r = |x - x'|.
  double operator()(double r) const;
  std::string label() const;
  /// "SE-<l>", "RQ-<l>-<alpha>", "Mat12-<l>", "Mat32-<l>", "Mat52-<l>",
  /// "Periodic-<l>-<T>".
  static KernelSpec parse(std::string_view label);
};

enum class CurveKind { X, X2, X3, Cbrt, Exp, Sigmoid5, SigmoidStd, BowmanA, GhosalM };

struct NamedCurve {
  CurveKind kind = CurveKind::X;
  double a = 0.0;  // BowmanA bump height
  int index = 0;   // GhosalM index in 1..4

  void validate() const;
  std::string label() const;
  /// Conventional domain: [0, 1] for the Bowman and Ghosal families,
  /// [-1, 1] otherwise.
  std::pair<double, double> domain() const;
  /// True for the curves that are nondecreasing on their domain.
  bool is_monotone() const;
  /// "x", "x2", "x3", "cbrt", "exp", "sigmoid" (1/(1+e^{-5x})),
  /// "sigmoid-std" (1/(1+e^{-x})), "bowman-<a>", "ghosal-m<i>".
  static NamedCurve parse(std::string_view label);
};

VectorXd eval_curve(const NamedCurve& curve, std::span<const double> x);

MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> x);

/// One draw f ~ N(0, Sigma + jitter I) with jitter 1e-7, raised tenfold
/// (up to 1e-4) while the Cholesky factorization fails.
VectorXd gp_sample(const KernelSpec& spec, std::span<const double> x, std::uint64_t seed);

/// Either a fixed curve or a Gaussian-process kernel.
using TruthSpec = std::variant<NamedCurve, KernelSpec>;

TruthSpec parse_truth(std::string_view label);
std::string truth_label(const TruthSpec& t);
std::pair<double, double> truth_domain(const TruthSpec& t);

}  // namespace mdspline

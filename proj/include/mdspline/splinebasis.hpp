#pragma once

// Cubic B-spline bases on open (clamped) knot vectors: knot placement,
// design matrices via Cox-de Boor evaluation, and the exact roughness
// penalty matrix Omega_jk = int B_j''(s) B_k''(s) ds.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mdspline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kSplineOrder = 4;

/// Cubic knot sequence [lo x4, interior..., hi x4]. Interior knots are
/// strictly increasing and strictly inside (lo, hi).
class KnotVector {
 public:
  /// Cubic polynomials on [0, 1] (no interior knots).
  KnotVector() : KnotVector(0.0, 1.0, {}) {}
  KnotVector(double lo, double hi, std::vector<double> interior);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  const std::vector<double>& interior() const noexcept { return interior_; }
  static constexpr int order() noexcept { return kSplineOrder; }

  /// Number of basis functions J = #interior + 4.
  int size() const noexcept { return static_cast<int>(interior_.size()) + kSplineOrder; }

  /// Full knot sequence of length J + 4.
  const std::vector<double>& sequence() const noexcept { return full_; }

  bool contains(double x) const noexcept { return x >= lo_ && x <= hi_; }

  /// Index s of the knot span [t_s, t_{s+1}) containing x, with
  /// 3 <= s <= J-1. x == hi maps to the last nonempty span.
  int span(double x) const;

  friend bool operator==(const KnotVector&, const KnotVector&) = default;

 private:
  double lo_;
  double hi_;
  std::vector<double> interior_;
  std::vector<double> full_;
};

/// Sorted distinct values of x.
std::vector<double> distinct_sorted(std::span<const double> x);

/// J-4 interior knots at quantile levels k/(J-3) of the distinct x values
/// (linear interpolation between order statistics).
KnotVector build_knots(std::span<const double> x, int J);

/// Knots for smoothing splines: every distinct interior data value is a
/// knot. When there are more than max_interior of them, max_interior
/// quantile-placed knots are used instead.
KnotVector build_smoothing_knots(std::span<const double> x, int max_interior = 200);

/// Values of the four nonzero basis functions B_{s-3..s} at x, where s is
/// the span index; derivatives up to order `nderiv` (<= 3) in rows.
struct LocalBasis {
  int first = 0;                                  // index of the first nonzero function
  std::array<std::array<double, 4>, 4> values{};  // values[d][i]: d-th derivative of B_{first+i}
};

LocalBasis local_basis(const KnotVector& knots, double x, int nderiv = 0);

/// n x J matrix with B(i, j) = B_j(x_i).
MatrixXd design_matrix(const KnotVector& knots, std::span<const double> x);

/// J x J matrix of int B_j'' B_k'' over [lo, hi], integrated exactly.
MatrixXd penalty_matrix(const KnotVector& knots);

/// sum_j gamma_j B_j(t_i).
VectorXd eval_spline(const KnotVector& knots, const VectorXd& gamma, std::span<const double> t);

/// Evaluated basis and roughness penalty for one knot vector and sample.
struct DesignPair {
  MatrixXd B;
  MatrixXd Omega;
  std::vector<double> xs;
};

DesignPair make_design_pair(const KnotVector& knots, std::span<const double> x);

inline std::span<const double> as_span(const VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace mdspline

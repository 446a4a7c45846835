#include "mdspline/splinebasis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mdspline/error.hpp"

namespace mdspline {

KnotVector::KnotVector(double lo, double hi, std::vector<double> interior)
    : lo_(lo), hi_(hi), interior_(std::move(interior)) {
  if (!(lo_ < hi_) || !std::isfinite(lo_) || !std::isfinite(hi_)) {
    throw Error(ErrorCode::DegenerateRange, "knot range requires lo < hi");
  }
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    const double k = interior_[i];
    if (!(k > lo_ && k < hi_)) {
      throw Error(ErrorCode::InvalidKnots, "interior knot outside (lo, hi)");
    }
    if (i > 0 && !(k > interior_[i - 1])) {
      throw Error(ErrorCode::InvalidKnots, "interior knots must be strictly increasing");
    }
  }
  full_.reserve(interior_.size() + 2 * kSplineOrder);
  full_.insert(full_.end(), kSplineOrder, lo_);
  full_.insert(full_.end(), interior_.begin(), interior_.end());
  full_.insert(full_.end(), kSplineOrder, hi_);
}

int KnotVector::span(double x) const {
  const int J = size();
  if (x >= hi_) return J - 1;
  // first knot strictly greater than x, minus one
  auto it = std::upper_bound(full_.begin() + kSplineOrder - 1, full_.begin() + J + 1, x);
  return static_cast<int>(it - full_.begin()) - 1;
}

std::vector<double> distinct_sorted(std::span<const double> x) {
  std::vector<double> u(x.begin(), x.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

namespace {

double quantile_sorted(const std::vector<double>& u, double p) {
  const double h = p * static_cast<double>(u.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= u.size()) return u.back();
  const double frac = h - static_cast<double>(lo);
  return u[lo] + frac * (u[lo + 1] - u[lo]);
}

void check_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite abscissa");
  }
}

}  // namespace

KnotVector build_knots(std::span<const double> x, int J) {
  if (J < kSplineOrder) {
    throw Error(ErrorCode::InvalidArgument, "basis size J must be at least 4");
  }
  check_finite(x);
  if (x.empty()) throw Error(ErrorCode::TooFewPoints, "empty sample");
  const auto u = distinct_sorted(x);
  if (u.size() == 1) throw Error(ErrorCode::DegenerateRange, "min(x) == max(x)");
  if (x.size() < static_cast<std::size_t>(J) || u.size() < static_cast<std::size_t>(J)) {
    std::ostringstream msg;
    msg << "need at least J = " << J << " distinct points, got " << u.size() << " distinct of "
        << x.size();
    throw Error(ErrorCode::TooFewPoints, msg.str());
  }
  std::vector<double> interior;
  const int nint = J - kSplineOrder;
  interior.reserve(static_cast<std::size_t>(nint));
  for (int k = 1; k <= nint; ++k) {
    interior.push_back(quantile_sorted(u, static_cast<double>(k) / (J - 3)));
  }
  return KnotVector(u.front(), u.back(), std::move(interior));
}

KnotVector build_smoothing_knots(std::span<const double> x, int max_interior) {
  check_finite(x);
  const auto u = distinct_sorted(x);
  if (u.empty()) throw Error(ErrorCode::TooFewPoints, "empty sample");
  if (u.size() == 1) throw Error(ErrorCode::DegenerateRange, "min(x) == max(x)");
  const auto n_interior = static_cast<int>(u.size()) - 2;
  if (n_interior > max_interior) return build_knots(u, max_interior + kSplineOrder);
  return KnotVector(u.front(), u.back(), std::vector<double>(u.begin() + 1, u.end() - 1));
}

LocalBasis local_basis(const KnotVector& knots, double x, int nderiv) {
  if (!knots.contains(x)) {
    std::ostringstream msg;
    msg << "x = " << x << " outside [" << knots.lo() << ", " << knots.hi() << "]";
    throw Error(ErrorCode::OutOfRange, msg.str());
  }
  constexpr int p = kSplineOrder - 1;
  nderiv = std::clamp(nderiv, 0, p);
  const auto& t = knots.sequence();
  const int s = knots.span(x);

  // Triangular table of basis values (upper) and knot differences (lower),
  // then derivatives by differencing lower-order columns.
  double ndu[p + 1][p + 1];
  double left[p + 1];
  double right[p + 1];
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - t[s + 1 - j];
    right[j] = t[s + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  LocalBasis out;
  out.first = s - p;
  for (int j = 0; j <= p; ++j) out.values[0][j] = ndu[j][p];

  double a[2][p + 1];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= nderiv; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out.values[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= nderiv; ++k) {
    for (int j = 0; j <= p; ++j) out.values[k][j] *= factor;
    factor *= (p - k);
  }
  return out;
}

MatrixXd design_matrix(const KnotVector& knots, std::span<const double> x) {
  const int J = knots.size();
  MatrixXd B = MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), J);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto lb = local_basis(knots, x[i]);
    for (int j = 0; j < kSplineOrder; ++j) {
      B(static_cast<Eigen::Index>(i), lb.first + j) = lb.values[0][j];
    }
  }
  return B;
}

MatrixXd penalty_matrix(const KnotVector& knots) {
  // B_j'' is linear on each knot interval, so the product is quadratic and
  // two-point Gauss-Legendre is exact.
  const int J = knots.size();
  MatrixXd Omega = MatrixXd::Zero(J, J);
  const auto& t = knots.sequence();
  const double g = 1.0 / std::sqrt(3.0);
  for (int s = kSplineOrder - 1; s < J; ++s) {
    const double a = t[s];
    const double b = t[s + 1];
    if (!(b > a)) continue;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (double node : {mid - half * g, mid + half * g}) {
      const auto lb = local_basis(knots, node, 2);
      for (int i = 0; i < kSplineOrder; ++i) {
        for (int k = 0; k < kSplineOrder; ++k) {
          Omega(lb.first + i, lb.first + k) += half * lb.values[2][i] * lb.values[2][k];
        }
      }
    }
  }
  return Omega;
}

VectorXd eval_spline(const KnotVector& knots, const VectorXd& gamma, std::span<const double> t) {
  if (gamma.size() != knots.size()) {
    throw Error(ErrorCode::LengthMismatch, "coefficient vector length differs from basis size");
  }
  VectorXd out(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto lb = local_basis(knots, t[i]);
    double v = 0.0;
    for (int j = 0; j < kSplineOrder; ++j) v += lb.values[0][j] * gamma(lb.first + j);
    out(static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

DesignPair make_design_pair(const KnotVector& knots, std::span<const double> x) {
  return DesignPair{design_matrix(knots, x), penalty_matrix(knots),
                    std::vector<double>(x.begin(), x.end())};
}

}  // namespace mdspline

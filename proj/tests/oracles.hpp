#pragma once

// Test-only reference implementations. These deliberately avoid the
// library's code paths: plain recursion, explicit inverses, brute force.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cox-de Boor recursion B_{i,p}(x) on the full knot sequence t, with the
// right endpoint assigned to the last nonempty interval.
inline double cox_de_boor(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) {
    const double a = t[i];
    const double b = t[i + 1];
    if (a < b && x >= a && x < b) return 1.0;
    // closed right end for the last nonempty interval
    if (a < b && x == b && b == t.back()) return 1.0;
    return 0.0;
  }
  double v = 0.0;
  const double d1 = t[i + p] - t[i];
  const double d2 = t[i + p + 1] - t[i + 1];
  if (d1 > 0.0) v += (x - t[i]) / d1 * cox_de_boor(t, i, p - 1, x);
  if (d2 > 0.0) v += (t[i + p + 1] - x) / d2 * cox_de_boor(t, i + 1, p - 1, x);
  return v;
}

// k-th derivative of B_{i,p} by the textbook derivative recursion.
inline double cox_de_boor_deriv(const std::vector<double>& t, int i, int p, int k, double x) {
  if (k == 0) return cox_de_boor(t, i, p, x);
  double v = 0.0;
  const double d1 = t[i + p] - t[i];
  const double d2 = t[i + p + 1] - t[i + 1];
  if (d1 > 0.0) v += p / d1 * cox_de_boor_deriv(t, i, p - 1, k - 1, x);
  if (d2 > 0.0) v -= p / d2 * cox_de_boor_deriv(t, i + 1, p - 1, k - 1, x);
  return v;
}

// Pool-adjacent-violators projection onto nondecreasing sequences.
inline VectorXd pava_increasing(const VectorXd& v) {
  const auto n = v.size();
  std::vector<double> level;
  std::vector<int> count;
  for (Eigen::Index i = 0; i < n; ++i) {
    level.push_back(v(i));
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double merged = (level[level.size() - 2] * count[count.size() - 2] +
                             level.back() * count.back()) /
                            (count[count.size() - 2] + count.back());
      const int c = count[count.size() - 2] + count.back();
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = c;
    }
  }
  VectorXd out(n);
  Eigen::Index k = 0;
  for (std::size_t b = 0; b < level.size(); ++b) {
    for (int c = 0; c < count[b]; ++c) out(k++) = level[b];
  }
  return out;
}

inline double cone_objective(const MatrixXd& B, const MatrixXd& Omega, const VectorXd& y,
                             double mu, double lambda, const VectorXd& u, const VectorXd& d) {
  const VectorXd s = u + d;
  double f = (y - B * s).squaredNorm() + mu * (B * (u - d)).squaredNorm();
  if (lambda != 0.0) f += lambda * s.dot(Omega * s);
  return f;
}

// Accelerated projected gradient from many random starts; projection onto
// the cone is a pair of isotonic regressions.
inline double multistart_cone_min(const MatrixXd& B, const MatrixXd& Omega, const VectorXd& y,
                                  double mu, double lambda, int starts, int iters,
                                  unsigned seed) {
  const auto J = B.cols();
  MatrixXd K = B.transpose() * B;
  MatrixXd H(2 * J, 2 * J);
  const MatrixXd Om = lambda != 0.0 ? MatrixXd(lambda * Omega) : MatrixXd::Zero(J, J);
  H.topLeftCorner(J, J) = (1 + mu) * K + Om;
  H.bottomRightCorner(J, J) = (1 + mu) * K + Om;
  H.topRightCorner(J, J) = (1 - mu) * K + Om;
  H.bottomLeftCorner(J, J) = (1 - mu) * K + Om;
  VectorXd h(2 * J);
  h << B.transpose() * y, B.transpose() * y;
  const double L = 2.0 * Eigen::SelfAdjointEigenSolver<MatrixXd>(H).eigenvalues().maxCoeff();
  auto project = [&](const VectorXd& g) {
    VectorXd out(2 * J);
    out.head(J) = pava_increasing(g.head(J));
    out.tail(J) = -pava_increasing(-g.tail(J));
    return out;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  double best = INFINITY;
  for (int s = 0; s < starts; ++s) {
    VectorXd x(2 * J);
    for (Eigen::Index i = 0; i < 2 * J; ++i) x(i) = nd(rng) * (1.0 + y.cwiseAbs().maxCoeff());
    x = project(x);
    VectorXd yk = x;
    double tk = 1.0;
    for (int it = 0; it < iters; ++it) {
      const VectorXd grad = 2.0 * (H * yk - h);
      const VectorXd xn = project(yk - grad / L);
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      yk = xn + ((tk - 1.0) / tn) * (xn - x);
      x = xn;
      tk = tn;
    }
    best = std::min(best, cone_objective(B, Omega, y, mu, lambda, x.head(J), x.tail(J)));
  }
  return best;
}

}  // namespace oracle

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mdspline/error.hpp"
#include "mdspline/monocone_qp.hpp"
#include "mdspline/splinebasis.hpp"
#include "oracles.hpp"

using namespace mdspline;

namespace {

struct Instance {
  MatrixXd B;
  MatrixXd Omega;
  VectorXd y;
  std::vector<double> x;
};

Instance spline_instance(std::mt19937_64& rng, int n, int J, double noise = 1.0) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> nd;
  Instance ins;
  ins.x.resize(static_cast<std::size_t>(n));
  for (auto& v : ins.x) v = u(rng);
  const auto k = build_knots(ins.x, J);
  ins.B = design_matrix(k, ins.x);
  ins.Omega = penalty_matrix(k);
  ins.y.resize(n);
  for (int i = 0; i < n; ++i) ins.y(i) = std::sin(3 * ins.x[i]) + noise * nd(rng);
  return ins;
}

bool nondecreasing(const VectorXd& v, double eps = 0.0) {
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) - v(i - 1) < -eps) return false;
  return true;
}

}  // namespace

TEST_CASE("sequence_decompose") {
  auto check = [](VectorXd g, VectorXd eu, VectorXd ed) {
    const auto [u, d] = sequence_decompose(g);
    CHECK(u == eu);
    CHECK(d == ed);
    CHECK(u + d == g);
  };
  check(VectorXd{{1, 2, 3}}, VectorXd{{1, 2, 3}}, VectorXd{{0, 0, 0}});
  check(VectorXd{{3, 2, 1}}, VectorXd{{3, 3, 3}}, VectorXd{{0, -1, -2}});
  check(VectorXd{{0, 2, 1}}, VectorXd{{0, 2, 2}}, VectorXd{{0, 0, -1}});

  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 100; ++t) {
    VectorXd g(12);
    for (auto& v : g) v = nd(rng);
    const auto [u, d] = sequence_decompose(g);
    CHECK(nondecreasing(u));
    CHECK(nondecreasing(-d));
    CHECK((u + d - g).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("solve_ls") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  SUBCASE("exact interpolation in span") {
    auto ins = spline_instance(rng, 30, 7);
    VectorXd g0(7);
    for (auto& v : g0) v = nd(rng);
    CHECK((solve_ls(ins.B, ins.B * g0) - g0).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(solve_ls(ins.B, VectorXd::Zero(30)).isZero());
  }
  SUBCASE("normal equations oracle") {
    MatrixXd B(20, 5);
    VectorXd y(20);
    for (auto& v : B.reshaped()) v = nd(rng);
    for (auto& v : y) v = nd(rng);
    const VectorXd ref = (B.transpose() * B).inverse() * (B.transpose() * y);
    const VectorXd got = solve_ls(B, y);
    CHECK((got - ref).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((B.transpose() * (y - B * got)).norm() <= 1e-8 * (B.transpose() * y).norm());
  }
  SUBCASE("rank deficiency") {
    MatrixXd B = MatrixXd::Ones(10, 3);
    CHECK_THROWS_AS(solve_ls(B, VectorXd::Ones(10)), Error);
  }
}

TEST_CASE("solve_smoothing") {
  std::mt19937_64 rng(6);
  auto ins = spline_instance(rng, 40, 10);
  SUBCASE("lambda = 0 equals least squares") {
    CHECK((solve_smoothing(ins.B, ins.Omega, ins.y, 0.0) - solve_ls(ins.B, ins.y))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
  SUBCASE("dense solve oracle") {
    const double lam = 0.3;
    const VectorXd ref =
        (ins.B.transpose() * ins.B + lam * ins.Omega).inverse() * ins.B.transpose() * ins.y;
    CHECK((solve_smoothing(ins.B, ins.Omega, ins.y, lam) - ref).cwiseAbs().maxCoeff() <= 1e-7);
  }
  SUBCASE("huge lambda approaches the least-squares line") {
    VectorXd yc = ins.y.array() - ins.y.mean();
    const VectorXd fit = ins.B * solve_smoothing(ins.B, ins.Omega, yc, 1e12);
    MatrixXd X(40, 2);
    for (int i = 0; i < 40; ++i) X.row(i) << 1.0, ins.x[static_cast<std::size_t>(i)];
    const VectorXd line = X * (X.transpose() * X).inverse() * X.transpose() * yc;
    CHECK((fit - line).cwiseAbs().maxCoeff() <= 1e-3);
  }
  SUBCASE("more basis functions than points still solvable with lambda > 0") {
    std::vector<double> x{0.0, 0.2, 0.5, 0.7, 1.0};
    const auto k = build_smoothing_knots(x);
    const auto B = design_matrix(k, x);
    const auto Om = penalty_matrix(k);
    VectorXd y{{1, 2, 0, 3, 1}};
    CHECK(solve_smoothing(B, Om, y, 1e-3).allFinite());
    CHECK_THROWS_AS(solve_smoothing(B, Om, y, 0.0), Error);
  }
}

TEST_CASE("cone QP constant response") {
  std::mt19937_64 rng(8);
  auto ins = spline_instance(rng, 25, 8);
  const double c = 2.5;
  for (double mu : {0.1, 1.0, 10.0}) {
    ConeQpProblem p{ins.B, MatrixXd(), VectorXd::Constant(25, c), mu, 0.0};
    const auto sol = solve_cone_qp(p);
    CHECK(sol.converged);
    CHECK(((ins.B * (sol.gamma_u + sol.gamma_d)).array() - c).abs().maxCoeff() <= 1e-7);
    CHECK((ins.B * (sol.gamma_u - sol.gamma_d)).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("cone QP huge mu collapses to the mean") {
  std::mt19937_64 rng(10);
  auto ins = spline_instance(rng, 50, 9);
  ConeQpProblem p{ins.B, MatrixXd(), ins.y, 1e8, 0.0};
  const auto sol = solve_cone_qp(p);
  const VectorXd fit = ins.B * (sol.gamma_u + sol.gamma_d);
  CHECK((fit.array() - ins.y.mean()).abs().maxCoeff() <= 1e-3);
}

TEST_CASE("cone QP matches multi-start projected gradient oracle") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u01(0, 1);
  for (int t = 0; t < 12; ++t) {
    const int n = 6;
    const int J = 4;
    auto ins = spline_instance(rng, n, J);
    const double mu = 0.5;
    ConeQpProblem p{ins.B, ins.Omega, ins.y, mu, 0.0};
    const auto sol = solve_cone_qp(p);
    const double ref = oracle::multistart_cone_min(ins.B, ins.Omega, ins.y, mu, 0.0, 20, 4000, 99);
    CHECK(sol.converged);
    CHECK(sol.objective <= ref + 1e-5 * std::abs(ref) + 1e-12);
    CHECK(sol.objective >= ref - 1e-5 * std::abs(ref) - 1e-9);
  }
}

TEST_CASE("cone QP invariants on random instances") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 40; ++t) {
    const int J = 4 + t % 12;
    const int n = J + 5 + t;
    auto ins = spline_instance(rng, n, J, 0.5);
    const double mu = std::pow(10.0, -2.0 + (t % 5));
    const double lambda = (t % 3 == 0) ? 0.0 : 1e-3 * (t % 7);
    ConeQpProblem p{ins.B, ins.Omega, ins.y, mu, lambda};
    const auto sol = solve_cone_qp(p);
    CHECK(sol.converged);
    CHECK(sol.kkt_residual <= 1e-7 * (1.0 + (ins.B.transpose() * ins.y).norm()));
    CHECK(nondecreasing(sol.gamma_u));
    CHECK(nondecreasing(-sol.gamma_d));
    // objective never increases
    for (std::size_t i = 1; i < sol.objective_history.size(); ++i) {
      CHECK(sol.objective_history[i] <=
            sol.objective_history[i - 1] + 1e-12 * std::abs(sol.objective_history[0]));
    }
    // mean equality of the two components
    const double mu_gap = (ins.B * sol.gamma_u).sum() - (ins.B * sol.gamma_d).sum();
    const double scale = std::max(1.0, sol.gamma_u.cwiseAbs().maxCoeff());
    CHECK(std::abs(mu_gap) <= 1e-6 * n * scale);
    // at least one tie
    int ties = 0;
    for (int j = 1; j < J; ++j) {
      ties += sol.gamma_u(j) - sol.gamma_u(j - 1) <= 1e-6;
      ties += sol.gamma_d(j - 1) - sol.gamma_d(j) <= 1e-6;
    }
    CHECK(ties > 0);
  }
}

TEST_CASE("cone QP with mu = 0 reproduces least squares") {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 10; ++t) {
    auto ins = spline_instance(rng, 40, 6 + t);
    ConeQpProblem p{ins.B, MatrixXd(), ins.y, 0.0, 0.0};
    const auto sol = solve_cone_qp(p);
    const VectorXd ls = ins.B * solve_ls(ins.B, ins.y);
    CHECK((ins.B * (sol.gamma_u + sol.gamma_d) - ls).cwiseAbs().maxCoeff() <= 1e-6 * ins.y.norm());
  }
}

TEST_CASE("cone QP warm start and validation") {
  std::mt19937_64 rng(18);
  auto ins = spline_instance(rng, 30, 8);
  ConeQpProblem p{ins.B, MatrixXd(), ins.y, 1.0, 0.0};
  const auto [wu, wd] = sequence_decompose(solve_ls(ins.B, ins.y));
  ConeQpOptions opts;
  opts.warm_start = std::make_pair(wu, wd);
  const auto sol = solve_cone_qp(p, opts);
  CHECK(sol.objective <= cone_objective(p, wu, wd));

  ConeQpProblem bad{ins.B, MatrixXd(), ins.y, -1.0, 0.0};
  CHECK_THROWS_AS(solve_cone_qp(bad), Error);
  ConeQpProblem mismatch{ins.B, MatrixXd(), VectorXd::Ones(3), 1.0, 0.0};
  CHECK_THROWS_AS(solve_cone_qp(mismatch), Error);

  ConeQpOptions capped;
  capped.max_iterations = 1;
  const auto partial = solve_cone_qp(ConeQpProblem{ins.B, MatrixXd(), ins.y, 3.0, 0.0}, capped);
  CHECK(partial.iterations <= 1);
  CHECK(nondecreasing(partial.gamma_u));
}

TEST_CASE("cone QP with more basis functions than points") {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> nd;
  std::vector<double> x(60);
  for (auto& v : x) v = u(rng);
  const auto k = build_smoothing_knots(x);
  const auto B = design_matrix(k, x);
  const auto Om = penalty_matrix(k);
  VectorXd y(60);
  for (int i = 0; i < 60; ++i) y(i) = x[static_cast<std::size_t>(i)] * (1 - x[static_cast<std::size_t>(i)]) + 0.05 * nd(rng);
  ConeQpProblem p{B, Om, y, 0.3, 1e-4};
  const auto sol = solve_cone_qp(p);
  CHECK(sol.converged);
  const double ref = oracle::multistart_cone_min(B, Om, y, 0.3, 1e-4, 2, 200000, 5);
  CHECK(sol.objective <= ref + 1e-5 * std::abs(ref));
}

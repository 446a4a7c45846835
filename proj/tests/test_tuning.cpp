#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "mdspline/error.hpp"
#include "mdspline/tuning.hpp"

using namespace mdspline;

namespace {

std::vector<double> uniform_x(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = u(rng);
  return x;
}

VectorXd noisy(const std::vector<double>& x, std::mt19937_64& rng, double sigma, auto&& f) {
  std::normal_distribution<double> nd;
  VectorXd y(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = f(x[i]) + sigma * nd(rng);
  return y;
}

// Least-squares straight line through (x, y), returned as a predictor.
Predictor line_fit(std::span<const double> x, const VectorXd& y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  MatrixXd X(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) << 1.0, x[static_cast<std::size_t>(i)];
  const Eigen::Vector2d beta = (X.transpose() * X).inverse() * X.transpose() * y;
  return [beta](std::span<const double> t) {
    VectorXd out(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) out(static_cast<Eigen::Index>(i)) = beta(0) + beta(1) * t[i];
    return out;
  };
}

CvGrid small_grid() {
  CvGrid g;
  g.mu_values = {1e-3, 0.1, 1.0, 10.0};
  g.J_values = {4, 6, 8};
  g.lambda_values = {1e-4, 1e-2, 1.0};
  g.k_values = {0.25, 0.5, 0.75, 1.0};
  g.folds = 5;
  return g;
}

}  // namespace

TEST_CASE("default grids") {
  const auto g = CvGrid::defaults(100);
  REQUIRE(g.mu_values.size() == 10u);
  CHECK(g.mu_values.front() == doctest::Approx(1e-6));
  CHECK(g.mu_values.back() == doctest::Approx(1e2));
  REQUIRE(g.lambda_values.size() == 10u);
  CHECK(g.lambda_values.front() == doctest::Approx(1e-8));
  CHECK(g.lambda_values.back() == doctest::Approx(10.0));
  CHECK(g.J_values.front() == 4);
  CHECK(g.J_values.back() == 50);
  CHECK(g.J_values.size() == 24u);
  CHECK(g.k_values.size() == 20u);
  CHECK(g.k_values.front() == doctest::Approx(0.05));
  CHECK(g.k_values.back() == 1.0);
  CHECK(g.fold_count(100) == 100);
  CHECK(CvGrid::defaults(400).fold_count(400) == 10);
  CHECK(CvGrid::defaults(40).J_values.back() == 20);
}

TEST_CASE("fold assignment") {
  const auto loo = fold_assignment(7, 7, 1);
  for (int i = 0; i < 7; ++i) CHECK(loo[static_cast<std::size_t>(i)] == i);

  const auto a = fold_assignment(103, 10, 42);
  CHECK(a == fold_assignment(103, 10, 42));
  CHECK(a != fold_assignment(103, 10, 43));
  std::vector<int> count(10, 0);
  for (int f : a) ++count[static_cast<std::size_t>(f)];
  for (int c : count) CHECK((c == 10 || c == 11));
  CHECK_THROWS_AS(fold_assignment(5, 1, 0), Error);
  CHECK_THROWS_AS(fold_assignment(5, 6, 0), Error);
}

TEST_CASE("cv_error") {
  SUBCASE("constant response with a constant-capable fitter") {
    std::mt19937_64 rng(1);
    const auto x = uniform_x(rng, 30);
    const VectorXd y = VectorXd::Constant(30, 1.5);
    const FitClosure cubic = [](std::span<const double> xt, const VectorXd& yt) -> Predictor {
      const auto k = build_knots(xt, 4);
      const VectorXd g = solve_ls(design_matrix(k, xt), yt);
      return [k, g](std::span<const double> t) { return eval_spline(k, g, t); };
    };
    CHECK(cv_error(x, y, cubic, 30, 0) <= 1e-10);
    CHECK(cv_error(x, y, cubic, 5, 9) <= 1e-10);
  }
  SUBCASE("leave-one-out of a straight-line fit matches the hat-matrix formula") {
    const std::vector<double> x{0.0, 0.7, 1.1, 2.0, 3.5};
    const VectorXd y{{1.0, 0.3, 2.2, 1.9, 4.1}};
    MatrixXd X(5, 2);
    for (int i = 0; i < 5; ++i) X.row(i) << 1.0, x[static_cast<std::size_t>(i)];
    const MatrixXd H = X * (X.transpose() * X).inverse() * X.transpose();
    const VectorXd e = y - H * y;
    double ref = 0.0;
    for (int i = 0; i < 5; ++i) ref += std::pow(e(i) / (1.0 - H(i, i)), 2);
    ref /= 5.0;
    CHECK(cv_error(x, y, line_fit, 5, 0, /*clamp=*/false) == doctest::Approx(ref).epsilon(1e-12));

    // with clamping, the two end points are predicted at the nearest
    // training boundary
    double clamped = 0.0;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> xt;
      VectorXd yt(4);
      int k = 0;
      for (int j = 0; j < 5; ++j) {
        if (j == i) continue;
        xt.push_back(x[static_cast<std::size_t>(j)]);
        yt(k++) = y(j);
      }
      const double t = std::clamp(x[static_cast<std::size_t>(i)], xt.front(), xt.back());
      clamped += std::pow(y(i) - line_fit(xt, yt)(std::vector<double>{t})(0), 2);
    }
    CHECK(cv_error(x, y, line_fit, 5, 0) == doctest::Approx(clamped / 5.0).epsilon(1e-12));
  }
  SUBCASE("deterministic given the seed") {
    std::mt19937_64 rng(2);
    const auto x = uniform_x(rng, 40);
    const VectorXd y = noisy(x, rng, 0.3, [](double v) { return v * v; });
    CHECK(cv_error(x, y, line_fit, 4, 11) == cv_error(x, y, line_fit, 4, 11));
  }
  SUBCASE("fit failures are reported") {
    const std::vector<double> x{0, 1, 2, 3};
    const FitClosure bad = [](std::span<const double>, const VectorXd&) -> Predictor {
      throw Error(ErrorCode::SingularDesign, "no");
    };
    CHECK_THROWS_AS(cv_error(x, VectorXd::Zero(4), bad, 2, 0), Error);
  }
}

TEST_CASE("tune_mdcs") {
  std::mt19937_64 rng(3);
  const auto x = uniform_x(rng, 60);
  SUBCASE("single-cell grid returns that cell's fit") {
    const VectorXd y = noisy(x, rng, 0.5, [](double v) { return std::sin(2 * v); });
    CvGrid g;
    g.mu_values = {0.3};
    g.J_values = {7};
    g.folds = 6;
    const auto res = tune_mdcs(x, y, g, CsStrategy::JointJMu);
    CHECK(res.surface.cells.size() == 1u);
    CHECK(res.fit.mu == 0.3);
    CHECK(res.fit.basis_size() == 7);
    const auto direct = fit_mdcs(x, y, 7, 0.3);
    CHECK((res.fit.fitted - direct.fitted).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("strongly increasing data gives a flat decreasing component") {
    const VectorXd y = noisy(x, rng, 0.05, [](double v) { return 3 * v + v * v * v; });
    const auto res = tune_mdcs(x, y, small_grid(), CsStrategy::JointJMu);
    const double eps = tie_tolerance(res.fit.gamma_u, res.fit.gamma_d);
    CHECK(detect_ties(res.fit.gamma_d, eps).g() == 1);
    CHECK(res.fit.c_offset.has_value());
  }
  SUBCASE("surface bookkeeping and determinism") {
    const VectorXd y = noisy(x, rng, 1.0, [](double v) { return v * v; });
    const auto a = tune_mdcs(x, y, small_grid(), CsStrategy::JointJMu, TuneOptions{.seed = 5});
    TuneOptions threaded;
    threaded.seed = 5;
    threaded.threads = 3;
    const auto b = tune_mdcs(x, y, small_grid(), CsStrategy::JointJMu, threaded);
    CHECK(a.surface.to_tsv() == b.surface.to_tsv());
    CHECK(a.surface.rows() == 3u);
    CHECK(a.surface.cols() == 4u);
    for (const auto& c : a.surface.cells) {
      CHECK_FALSE(c.failed);
      CHECK(c.error >= a.surface.best().error);
    }
    CHECK(a.fit.mu == a.surface.best().mu);
    CHECK(a.fit.basis_size() == a.surface.best().J);

    const auto two = tune_mdcs(x, y, small_grid(), CsStrategy::FixJThenMu, TuneOptions{.seed = 5});
    REQUIRE(two.baseline.has_value());
    CHECK(two.surface.rows() == 1u);
    CHECK(two.surface.best().J == two.baseline->best().J);

    std::istringstream tsv(a.surface.to_tsv());
    std::string line;
    int lines = 0;
    while (std::getline(tsv, line)) ++lines;
    CHECK(lines == 13);
  }
  SUBCASE("unbuildable cells are flagged, not fatal") {
    const VectorXd y = noisy(x, rng, 0.2, [](double v) { return v; });
    CvGrid g = small_grid();
    g.J_values = {6, 59};
    const auto res = tune_mdcs(x, y, g, CsStrategy::JointJMu);
    CHECK(res.surface.at(1, 0).failed);
    CHECK(std::isnan(res.surface.at(1, 0).error));
    CHECK_FALSE(res.surface.best().failed);
    CHECK(res.surface.best().J == 6);
  }
  SUBCASE("equal errors prefer the smallest mu and J") {
    const VectorXd y = VectorXd::Zero(60);
    const auto res = tune_mdcs(x, y, small_grid(), CsStrategy::JointJMu);
    CHECK(res.surface.best().mu == 1e-3);
    CHECK(res.surface.best().J == 4);
  }
}

TEST_CASE("tune_mdss") {
  std::mt19937_64 rng(4);
  const auto x = uniform_x(rng, 50);
  const VectorXd y = noisy(x, rng, 0.5, [](double v) { return 1.0 / (1.0 + std::exp(-5 * v)); });

  SUBCASE("shrinkage factor k = 1 is the smoothing spline") {
    CvGrid g = small_grid();
    g.k_values = {1.0};
    const auto res = tune_mdss(x, y, g, SsStrategy::ShrinkageFactor);
    REQUIRE(res.baseline.has_value());
    const double lambda0 = res.baseline->best().lambda;
    CHECK(res.fit.mu == 0.0);
    CHECK(res.fit.lambda == lambda0);
    const auto base = tune_smoothing_spline(x, y, g);
    CHECK((res.fit.fitted - base.fit.eval(x)).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("shrinkage parameter map") {
    const auto res = tune_mdss(x, y, small_grid(), SsStrategy::ShrinkageFactor);
    const double lambda0 = res.baseline->best().lambda;
    for (std::size_t c = 0; c < res.surface.cols(); ++c) {
      const double k = res.surface.col_values[c];
      const auto& cell = res.surface.at(0, c);
      CHECK(cell.mu + 1.0 == 1.0 / k);
      CHECK(cell.lambda == lambda0 / k);
    }
    CHECK(res.surface.at(0, 0).lambda == lambda0);
  }
  SUBCASE("single-cell grid returns that cell's fit") {
    CvGrid g;
    g.mu_values = {0.5};
    g.lambda_values = {1e-3};
    g.folds = 5;
    const auto res = tune_mdss(x, y, g, SsStrategy::JointLambdaMu);
    const auto direct = fit_mdss(x, y, 1e-3, 0.5);
    CHECK((res.fit.fitted - direct.fitted).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("joint and two-stage strategies") {
    const auto joint = tune_mdss(x, y, small_grid(), SsStrategy::JointLambdaMu);
    CHECK(joint.surface.rows() == 3u);
    CHECK(joint.surface.cols() == 4u);
    CHECK(joint.fit.lambda == joint.surface.best().lambda);
    CHECK(joint.fit.mu == joint.surface.best().mu);
    const auto fix = tune_mdss(x, y, small_grid(), SsStrategy::FixLambdaThenMu);
    CHECK(fix.surface.rows() == 1u);
    CHECK(fix.fit.lambda == fix.baseline->best().lambda);
  }
  SUBCASE("equal errors prefer the largest lambda") {
    const auto res = tune_smoothing_spline(x, VectorXd::Zero(50), small_grid());
    CHECK(res.fit.lambda == 1.0);
  }
}

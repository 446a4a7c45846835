#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mdspline/decomposition.hpp"
#include "mdspline/error.hpp"
#include "oracles.hpp"

using namespace mdspline;

namespace {

std::vector<double> uniform_x(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = u(rng);
  return x;
}

VectorXd sample_on(const std::vector<double>& x, auto&& f) {
  VectorXd y(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y(static_cast<Eigen::Index>(i)) = f(x[i]);
  return y;
}

double mse(const VectorXd& a, const VectorXd& b) { return (a - b).squaredNorm() / a.size(); }

bool nondecreasing(const VectorXd& v, double eps = 0.0) {
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) - v(i - 1) < -eps) return false;
  return true;
}

FitOptions solver_only() {
  FitOptions o;
  o.refine_closed_form = false;
  return o;
}

}  // namespace

TEST_CASE("detect_ties") {
  auto runs = [](VectorXd g, double eps) { return detect_ties(g, eps).runs; };
  using R = std::vector<std::pair<int, int>>;
  CHECK(runs(VectorXd{{1, 2, 3}}, 1e-6) == R{{0, 0}, {1, 1}, {2, 2}});
  CHECK(runs(VectorXd{{1, 1, 2, 2, 2, 3}}, 1e-6) == R{{0, 1}, {2, 4}, {5, 5}});
  CHECK(runs(VectorXd{{1, 1 + 5e-7, 2}}, 1e-6) == R{{0, 1}, {2, 2}});
  CHECK(runs(VectorXd{{3, 3, 1}}, 0.0) == R{{0, 1}, {2, 2}});
  CHECK_THROWS_AS(detect_ties(VectorXd{{1, 3, 2}}, 1e-6), Error);

  const auto tg = detect_ties(VectorXd{{0, 0, 1, 2, 2, 2, 5}}, 1e-9);
  CHECK(tg.g() == 4);
  const MatrixXd G = tg.aggregation_matrix();
  CHECK(G.rows() == 4);
  CHECK(G.cols() == 7);
  CHECK(((G.transpose() * VectorXd::Ones(4)).array() == 1.0).all());

  const VectorXd snapped = snap_ties(VectorXd{{1, 1 + 4e-7, 2}}, detect_ties(VectorXd{{1, 1 + 4e-7, 2}}, 1e-6));
  CHECK(snapped(0) == snapped(1));
  CHECK(snapped(0) == doctest::Approx(1 + 2e-7).epsilon(1e-15));
}

TEST_CASE("fit_mdcs on noiseless increasing data") {
  std::vector<double> x(30);
  for (int i = 0; i < 30; ++i) x[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / 29.0;
  const VectorXd y = sample_on(x, [](double v) { return v; });

  SUBCASE("mu = 1 gives a flat decreasing part and the shrinkage-with-offset fit") {
    const auto fit = fit_mdcs(x, y, 5, 1.0);
    CHECK(fit.gamma_d.maxCoeff() - fit.gamma_d.minCoeff() <= 1e-5);
    // gamma_u = gamma_ls / 2 and gamma_d = mean(y)/2, so the fit is (y + mean)/2
    const VectorXd expect = (y.array() + y.mean()) / 2.0;
    CHECK(mse(fit.fitted, expect) <= 1e-12);
    REQUIRE(fit.c_offset.has_value());
    CHECK(*fit.c_offset == doctest::Approx((design_matrix(fit.knots, x) * fit.gamma_u).mean()));
    CHECK(*fit.c_offset == doctest::Approx(y.mean() / 2.0).scale(1.0));
  }
  SUBCASE("tiny mu recovers the target") {
    const auto fit = fit_mdcs(x, y, 5, 1e-8);
    CHECK(mse(fit.fitted, y) <= 1e-6);
    CHECK(fit.gamma_d.maxCoeff() - fit.gamma_d.minCoeff() <= 1e-5);
  }
}

TEST_CASE("fit_mdcs with mu = 0 equals the cubic-spline least-squares fit") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 5; ++t) {
    const auto x = uniform_x(rng, 50);
    const VectorXd y = sample_on(x, [&](double v) { return std::sin(4 * v) + 0.3 * nd(rng); });
    const int J = 6 + 2 * t;
    const auto fit = fit_mdcs(x, y, J, 0.0);
    const MatrixXd B = design_matrix(build_knots(x, J), x);
    const VectorXd ls = B * (B.transpose() * B).inverse() * B.transpose() * y;
    CHECK((fit.fitted - ls).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("fit_mdss reductions") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  const auto x = uniform_x(rng, 40);
  const VectorXd y = sample_on(x, [&](double v) { return v * v + 0.2 * nd(rng); });

  SUBCASE("lambda = 0 agrees with MDCS on the same basis") {
    const auto knots = build_knots(x, 10);
    const auto ss = Decomposer(Method::MDSS, knots, x).fit(y, 0.7, 0.0);
    const auto cs = Decomposer(Method::MDCS, knots, x).fit(y, 0.7, 0.0);
    CHECK((ss.fitted - cs.fitted).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("mu = 0 equals the smoothing spline") {
    const double lambda = 1e-3;
    const auto fit = fit_mdss(x, y, lambda, 0.0);
    const auto k = build_smoothing_knots(x);
    const MatrixXd B = design_matrix(k, x);
    const MatrixXd Om = penalty_matrix(k);
    const VectorXd ref = B * (B.transpose() * B + lambda * Om).inverse() * B.transpose() * y;
    CHECK((fit.fitted - ref).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(fit.basis_size() == 42);
    CHECK_FALSE(fit.knots_capped);
  }
  SUBCASE("cubic fits reject a roughness penalty") {
    CHECK_THROWS_AS(Decomposer::cubic(x, 6).fit(y, 1.0, 0.1), Error);
  }
}

TEST_CASE("closed_form_cs special cases") {
  std::mt19937_64 rng(25);
  std::normal_distribution<double> nd;
  const auto x = uniform_x(rng, 35);
  const VectorXd y = sample_on(x, [&](double v) { return std::exp(v) + 0.1 * nd(rng); });
  const MatrixXd B = design_matrix(build_knots(x, 8), x);
  const MatrixXd I = MatrixXd::Identity(8, 8);
  const VectorXd gls = (B.transpose() * B).inverse() * B.transpose() * y;

  SUBCASE("mu = 0") {
    const auto [u, d] = closed_form_cs(B, y, 0.0, I);
    CHECK((u + d - gls).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(d.maxCoeff() == d.minCoeff());
    CHECK((u - (gls.array() - d(0)).matrix()).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("mu = 1 drops the offset") {
    const auto [u, d] = closed_form_cs(B, y, 1.0, I);
    CHECK((u - 0.5 * gls).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(d(0) == doctest::Approx((B * u).mean()).epsilon(1e-10));
  }
  SUBCASE("general G satisfies the tie-pattern equation") {
    const TieGroups tg{{{0, 0}, {1, 3}, {4, 4}, {5, 7}}};
    const MatrixXd G = tg.aggregation_matrix();
    for (double mu : {0.3, 2.0, 7.5}) {
      const auto [u, d] = closed_form_cs(B, y, mu, G);
      const double c = (B * u).sum() / 35.0;
      const MatrixXd GKG = G * B.transpose() * B * G.transpose();
      const VectorXd rhs = G.transpose() * GKG.inverse() * G * B.transpose() * y / (mu + 1.0) +
                           VectorXd::Constant(8, (mu - 1.0) / (mu + 1.0) * c);
      CHECK((u - rhs).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((d.array() - c).abs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("closed_form_ss reductions") {
  std::mt19937_64 rng(27);
  std::normal_distribution<double> nd;
  const auto x = uniform_x(rng, 30);
  const VectorXd y = sample_on(x, [&](double v) { return v * v * v + 0.1 * nd(rng); });
  const auto k = build_knots(x, 9);
  const MatrixXd B = design_matrix(k, x);
  const MatrixXd Om = penalty_matrix(k);
  const TieGroups tg{{{0, 1}, {2, 2}, {3, 5}, {6, 6}, {7, 8}}};
  const MatrixXd G = tg.aggregation_matrix();

  SUBCASE("lambda = 0 equals the cubic-spline closed form") {
    const auto [u1, d1] = closed_form_ss(B, Om, y, 0.0, 1.7, G);
    const auto [u2, d2] = closed_form_cs(B, y, 1.7, G);
    CHECK((u1 - u2).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((d1 - d2).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("mu = 0 sums to the smoothing spline") {
    const MatrixXd I = MatrixXd::Identity(9, 9);
    const auto [u, d] = closed_form_ss(B, Om, y, 0.2, 0.0, I);
    const VectorXd gss = (B.transpose() * B + 0.2 * Om).inverse() * B.transpose() * y;
    CHECK((u + d - gss).cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("no-tie form is shrinkage of the ridge solution plus a matrix offset") {
    const MatrixXd I = MatrixXd::Identity(9, 9);
    const double lam = 0.05;
    const double mu = 1.5;
    const auto [u, d] = closed_form_ss(B, Om, y, lam, mu, I);
    const double c = (B * u).sum() / 30.0;
    const MatrixXd K = B.transpose() * B;
    const VectorXd ridge = (K + lam / (1 + mu) * Om).inverse() * B.transpose() * y;
    const VectorXd offset = ((1 + mu) * K + lam * Om).inverse() * ((1 - mu) * K + lam * Om) *
                            VectorXd::Ones(9);
    CHECK((u - (ridge / (1 + mu) - c * offset)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("closed forms agree with the solver on strictly monotone noiseless targets") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> coef(0.2, 2.0);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const auto x = uniform_x(rng, 40);
    const double a = coef(rng);
    const double b = coef(rng);
    const double sgn = t % 2 == 0 ? 1.0 : -1.0;
    const VectorXd y = sample_on(x, [&](double v) { return sgn * (a * v + b * v * v * v); });
    const double mu = 0.25 * (1 + t % 8);
    const bool smoothing = t % 3 == 0;
    const Decomposer dec = smoothing ? Decomposer(Method::MDSS, build_knots(x, 12), x)
                                     : Decomposer::cubic(x, 4 + t % 9);
    const double lambda = smoothing ? 0.05 : 0.0;
    const auto fit = dec.fit(y, mu, lambda, solver_only());
    // which component is flat determines which closed form applies
    const bool up = sgn > 0;
    const VectorXd& moving = up ? fit.gamma_u : fit.gamma_d;
    const double eps = tie_tolerance(fit.gamma_u, fit.gamma_d);
    const MatrixXd G = detect_ties(moving, eps).aggregation_matrix();
    auto [cu, cd] = closed_form_ss(dec.B(), dec.Omega(), up ? y : VectorXd(-y), lambda, mu, G);
    if (!up) {
      VectorXd tmp = -cd;
      cd = -cu;
      cu = tmp;
    }
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    CHECK((fit.gamma_u - cu).cwiseAbs().maxCoeff() <= 1e-5 * scale);
    CHECK((fit.gamma_d - cd).cwiseAbs().maxCoeff() <= 1e-5 * scale);
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("solver and refinement agree on the documented configurations") {
  std::mt19937_64 rng(31);
  const auto x = uniform_x(rng, 50);
  const VectorXd y = sample_on(x, [](double v) { return v + 0.5 * v * v * v; });
  SUBCASE("MDSS lambda = 0.1, mu = 0.5") {
    const Decomposer dec(Method::MDSS, build_knots(x, 15), x);
    const auto raw = dec.fit(y, 0.5, 0.1, solver_only());
    const auto refined = dec.fit(y, 0.5, 0.1);
    CHECK(refined.source == FitSource::ClosedForm);
    CHECK((raw.gamma_u - refined.gamma_u).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK((raw.gamma_d - refined.gamma_d).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(refined.objective <= raw.objective * (1 + 1e-12));
  }
  SUBCASE("MDCS mu = 2") {
    const auto raw = fit_mdcs(x, y, 8, 2.0, solver_only());
    const MatrixXd B = design_matrix(raw.knots, x);
    const auto [cu, cd] = closed_form_cs(
        B, y, 2.0, detect_ties(raw.gamma_u, tie_tolerance(raw.gamma_u, raw.gamma_d)).aggregation_matrix());
    CHECK((raw.gamma_u - cu).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK((raw.gamma_d - cd).cwiseAbs().maxCoeff() <= 1e-5);
  }
  SUBCASE("MDSS with knots at the data, lambda = 0.05, mu = 1.5") {
    const auto raw = fit_mdss(x, y, 0.05, 1.5, solver_only());
    const auto refined = fit_mdss(x, y, 0.05, 1.5);
    CHECK((raw.fitted - refined.fitted).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("sign flip swaps and negates the components") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 6; ++t) {
    const auto x = uniform_x(rng, 40);
    const VectorXd y = sample_on(x, [&](double v) { return std::sin(3 * v) + 0.3 * nd(rng); });
    const Decomposer dec = t % 2 ? Decomposer::smoothing(x) : Decomposer::cubic(x, 10);
    const double lambda = t % 2 ? 1e-3 : 0.0;
    const auto pos = dec.fit(y, 0.5, lambda);
    const auto neg = dec.fit(-y, 0.5, lambda);
    const auto pp = predict(pos, x);
    const auto pn = predict(neg, x);
    CHECK((pp.f_up + pn.f_down).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((pp.f_down + pn.f_up).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("fit invariants on random data") {
  std::mt19937_64 rng(35);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const auto x = uniform_x(rng, 30 + t);
    const VectorXd y = sample_on(x, [&](double v) { return std::cos(2 * v) + 0.5 * nd(rng); });
    const bool ss = t % 2 == 1;
    const double mu = std::pow(10.0, -1.0 + t % 4);
    const auto fit = ss ? fit_mdss(x, y, 1e-2, mu) : fit_mdcs(x, y, 4 + t % 10, mu);
    const MatrixXd B = design_matrix(fit.knots, x);
    CHECK(nondecreasing(fit.gamma_u));
    CHECK(nondecreasing(-fit.gamma_d));
    CHECK((fit.fitted - B * (fit.gamma_u + fit.gamma_d)).cwiseAbs().maxCoeff() <= 1e-9);
    const double scale = std::max(1.0, fit.gamma_u.cwiseAbs().maxCoeff());
    CHECK(std::abs((B * fit.gamma_u).sum() - (B * fit.gamma_d).sum()) <= 1e-6 * fit.n * scale);
    if (fit.c_offset && fit.gamma_d.maxCoeff() == fit.gamma_d.minCoeff()) {
      CHECK(std::abs(*fit.c_offset - (B * fit.gamma_u).mean()) <= 1e-6);
    }
  }
}

TEST_CASE("predict") {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> nd;
  const auto x = uniform_x(rng, 60);
  const VectorXd y = sample_on(x, [&](double v) { return std::sin(5 * v) + 0.2 * nd(rng); });
  const auto fit = fit_mdcs(x, y, 12, 0.3);

  const auto at_x = predict(fit, x);
  CHECK((at_x.f - fit.fitted).cwiseAbs().maxCoeff() <= 1e-12);

  std::vector<double> grid(1000);
  for (int i = 0; i < 1000; ++i)
    grid[static_cast<std::size_t>(i)] = fit.knots.lo() + (fit.knots.hi() - fit.knots.lo()) * i / 999.0;
  const auto p = predict(fit, grid);
  for (int i = 1; i < 1000; ++i) {
    CHECK(p.f_up(i) - p.f_up(i - 1) >= -1e-8);
    CHECK(p.f_down(i) - p.f_down(i - 1) <= 1e-8);
  }
  CHECK_THROWS_AS(predict(fit, std::vector<double>{fit.knots.hi() + 0.1}), Error);

  const auto flat = fit_mdcs(x, VectorXd::Constant(60, 3.0), 8, 1.0);
  const auto pf = predict(flat, grid);
  CHECK((pf.f.array() - 3.0).abs().maxCoeff() <= 1e-7);
}

TEST_CASE("fit JSON round trip") {
  std::mt19937_64 rng(39);
  const auto x = uniform_x(rng, 25);
  const VectorXd y = sample_on(x, [](double v) { return v * v; });
  const auto fit = fit_mdss(x, y, 1e-3, 0.4);
  const auto j = to_json(fit);
  CHECK(j.at("method") == "MDSS");
  const auto back = fit_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.knots == fit.knots);
  CHECK(back.gamma_u == fit.gamma_u);
  CHECK(back.gamma_d == fit.gamma_d);
  CHECK(back.fitted == fit.fitted);
  CHECK(back.mu == fit.mu);
  CHECK(back.source == fit.source);
  CHECK(to_json(back) == j);
  CHECK_THROWS_AS(fit_from_json(nlohmann::json{{"method", "MDSS"}}), Error);
}

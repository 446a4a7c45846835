#include "mdspline/montest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mdspline/error.hpp"
#include "mdspline/parallel.hpp"
#include "mdspline/rng.hpp"

namespace mdspline {

std::string_view to_string(Hypothesis h) {
  switch (h) {
    case Hypothesis::IncreasingNull:
      return "increasing";
    case Hypothesis::DecreasingNull:
      return "decreasing";
    case Hypothesis::MonotoneNull:
      return "monotone";
  }
  return "?";
}

std::string_view to_string(Multiplier m) {
  return m == Multiplier::Normal ? "normal" : "rademacher";
}

Hypothesis parse_hypothesis(std::string_view s) {
  for (auto h : {Hypothesis::IncreasingNull, Hypothesis::DecreasingNull, Hypothesis::MonotoneNull}) {
    if (s == to_string(h)) return h;
  }
  throw Error(ErrorCode::UnknownLabel, "unknown hypothesis '" + std::string(s) + "'");
}

double sample_variance(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  // Centre on the first entry so that a snapped (exactly constant) component
  // has variance exactly zero instead of rounding noise from the mean.
  const Eigen::ArrayXd c = v.array() - v(0);
  const double m = c.mean();
  return (c - m).square().sum() / static_cast<double>(v.size() - 1);
}

double statistic(const DecompositionFit& fit, Hypothesis h) {
  switch (h) {
    case Hypothesis::IncreasingNull:
      return sample_variance(fit.gamma_d);
    case Hypothesis::DecreasingNull:
      return sample_variance(fit.gamma_u);
    case Hypothesis::MonotoneNull:
      return std::min(sample_variance(fit.gamma_u), sample_variance(fit.gamma_d));
  }
  return 0.0;
}

double bootstrap_p_value(double T, std::span<const double> deltas, double tie_weight) {
  if (deltas.empty()) throw Error(ErrorCode::InvalidArgument, "no bootstrap statistics");
  if (!(tie_weight >= 0.0 && tie_weight <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "tie weight must lie in [0, 1]");
  }
  // Exact ties are common: under a monotone truth the flat component is
  // snapped to a constant, so T and most delta_r are exactly zero. A strict
  // count would then always reject and an inclusive one would always give 1.
  const auto above = std::count_if(deltas.begin(), deltas.end(), [T](double d) { return d > T; });
  const auto tied = std::count(deltas.begin(), deltas.end(), T);
  return (static_cast<double>(above) + tie_weight * static_cast<double>(tied)) /
         static_cast<double>(deltas.size());
}

Hyperparameters select_hyperparameters(std::span<const double> x, const VectorXd& y,
                                       const TunerConfig& tuner) {
  if (tuner.fixed) return *tuner.fixed;
  const CvGrid grid = tuner.grid ? *tuner.grid : CvGrid::defaults(static_cast<int>(x.size()));
  if (tuner.method == Method::MDCS) {
    const auto res = tune_mdcs(x, y, grid, tuner.cs_strategy, tuner.tune);
    return {.J = res.fit.basis_size(), .lambda = 0.0, .mu = res.fit.mu};
  }
  const auto res = tune_mdss(x, y, grid, tuner.ss_strategy, tuner.tune);
  return {.J = res.fit.basis_size(), .lambda = res.fit.lambda, .mu = res.fit.mu};
}

TestResult wild_bootstrap_test(std::span<const double> x, const VectorXd& y,
                               const TunerConfig& tuner, const TestOptions& opts) {
  const Hyperparameters hyper = select_hyperparameters(x, y, tuner);
  const Decomposer dec =
      tuner.method == Method::MDCS ? Decomposer::cubic(x, hyper.J) : Decomposer::smoothing(x);
  return wild_bootstrap_test(dec, y, hyper, opts);
}

TestResult wild_bootstrap_test(const Decomposer& dec, const VectorXd& y,
                               const Hyperparameters& hyper, const TestOptions& opts) {
  if (opts.R < 1) throw Error(ErrorCode::InvalidArgument, "R must be >= 1");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  }
  const double lambda = dec.method() == Method::MDCS ? 0.0 : hyper.lambda;

  TestResult out;
  out.alpha = opts.alpha;
  out.hypothesis = opts.hypothesis;
  out.multiplier = opts.multiplier;
  out.method = dec.method();
  out.hyper = hyper;
  out.hyper.J = dec.basis_size();
  out.hyper.lambda = lambda;
  out.seed = opts.seed;
  out.fit = dec.fit(y, hyper.mu, lambda, opts.fit);
  if (!out.fit.converged) {
    throw Error(ErrorCode::FitFailure,
                "decomposition of the observed data did not converge (KKT residual " +
                    std::to_string(out.fit.kkt_residual) + ")");
  }
  out.statistic = statistic(out.fit, opts.hypothesis);

  // Null surface: the monotone component that carries the signal, shifted
  // by its mean so the flat component's level is restored.
  bool signal_up = true;
  switch (opts.hypothesis) {
    case Hypothesis::IncreasingNull:
      signal_up = true;
      break;
    case Hypothesis::DecreasingNull:
      signal_up = false;
      break;
    case Hypothesis::MonotoneNull:
      signal_up = sample_variance(out.fit.gamma_u) >= sample_variance(out.fit.gamma_d);
      break;
  }
  const VectorXd signal = dec.B() * (signal_up ? out.fit.gamma_u : out.fit.gamma_d);
  const VectorXd null_surface = signal.array() + signal.mean();
  const VectorXd resid = y - out.fit.fitted;

  FitOptions refit = opts.fit;
  refit.solver.warm_start = std::pair{out.fit.gamma_u, out.fit.gamma_d};

  const double inf = std::numeric_limits<double>::infinity();
  out.bootstrap.assign(static_cast<std::size_t>(opts.R), inf);
  std::vector<char> failed(static_cast<std::size_t>(opts.R), 0);
  parallel_for(opts.R, opts.threads, [&](int r) {
    VectorXd ystar(resid.size());
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      auto rng = make_engine(opts.seed, {static_cast<std::uint64_t>(r), attempt});
      if (opts.multiplier == Multiplier::Normal) {
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Eigen::Index i = 0; i < ystar.size(); ++i) ystar(i) = nd(rng);
      } else {
        std::bernoulli_distribution coin(0.5);
        for (Eigen::Index i = 0; i < ystar.size(); ++i) ystar(i) = coin(rng) ? 1.0 : -1.0;
      }
      ystar = null_surface + ystar.cwiseProduct(resid);
      try {
        const DecompositionFit f = dec.fit(ystar, hyper.mu, lambda, refit);
        if (f.converged) {
          out.bootstrap[static_cast<std::size_t>(r)] = statistic(f, opts.hypothesis);
          return;
        }
      } catch (const Error&) {
        // retried below with a fresh multiplier draw
      }
    }
    failed[static_cast<std::size_t>(r)] = 1;
  });
  out.failed_replicates = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  double tie_weight = 1.0;
  if (opts.randomize_ties) {
    auto rng = make_engine(opts.seed, {static_cast<std::uint64_t>(opts.R), 2});
    tie_weight = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
  out.tie_weight = tie_weight;
  out.p_value = bootstrap_p_value(out.statistic, out.bootstrap, tie_weight);
  out.reject = out.p_value < opts.alpha;
  return out;
}

nlohmann::json to_json(const TestResult& r) {
  nlohmann::json boot = nlohmann::json::array();
  for (double d : r.bootstrap) {
    if (std::isfinite(d)) {
      boot.push_back(d);
    } else {
      boot.push_back(nullptr);
    }
  }
  return {
      {"hypothesis", to_string(r.hypothesis)},
      {"method", to_string(r.method)},
      {"multiplier", to_string(r.multiplier)},
      {"statistic", r.statistic},
      {"p_value", r.p_value},
      {"tie_weight", r.tie_weight},
      {"alpha", r.alpha},
      {"reject", r.reject},
      {"R", r.R()},
      {"seed", r.seed},
      {"failed_replicates", r.failed_replicates},
      {"hyperparameters", {{"J", r.hyper.J}, {"lambda", r.hyper.lambda}, {"mu", r.hyper.mu}}},
      {"bootstrap", boot},
      {"fit", to_json(r.fit)},
  };
}

BhResult bh_adjust(std::span<const double> p, double alpha) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p-values must lie in [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::size_t k = 0;  // number of rejections
  for (std::size_t i = m; i >= 1; --i) {
    if (p[order[i - 1]] <= static_cast<double>(i) * alpha / static_cast<double>(m)) {
      k = i;
      break;
    }
  }
  BhResult out;
  out.rejected.assign(m, false);
  if (k == 0) return out;
  out.cutoff = p[order[k - 1]];
  for (std::size_t i = 0; i < m; ++i) out.rejected[i] = p[i] <= out.cutoff;
  return out;
}

double hypergeom_enrich(const EnrichInput& e) {
  const auto [N, n, M, k] = e;
  if (N < 0 || n < 0 || M < 0 || k < 0 || M > N || n > N || k > std::min(n, M)) {
    throw Error(ErrorCode::InvalidCounts, "need 0 <= k <= min(n, M), M <= N and n <= N");
  }
  if (k == 0) return 1.0;
  auto lchoose = [](long long a, long long b) {
    return std::lgamma(static_cast<double>(a) + 1.0) - std::lgamma(static_cast<double>(b) + 1.0) -
           std::lgamma(static_cast<double>(a - b) + 1.0);
  };
  // Sum the upper tail P(X >= k) directly so small p-values keep their
  // relative accuracy; it equals 1 minus the lower sum.
  const long long lo = std::max(k, n - (N - M));
  const long long hi = std::min(n, M);
  if (lo > hi) return 0.0;
  const double denom = lchoose(N, n);
  std::vector<double> terms;
  for (long long i = lo; i <= hi; ++i) terms.push_back(lchoose(M, i) + lchoose(N - M, n - i) - denom);
  const double top = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return std::clamp(std::exp(top) * s, 0.0, 1.0);
}

}  // namespace mdspline

#pragma once

// Monotonicity tests built on the monotone decomposition (wild bootstrap
// on the variance of the component that is flat under the null), plus
// Benjamini-Hochberg step-up and the hypergeometric enrichment p-value
// used when screening many series.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdspline/decomposition.hpp"
#include "mdspline/tuning.hpp"

namespace mdspline {

enum class Hypothesis { IncreasingNull, DecreasingNull, MonotoneNull };
enum class Multiplier { Normal, Rademacher };

std::string_view to_string(Hypothesis h);
std::string_view to_string(Multiplier m);
Hypothesis parse_hypothesis(std::string_view s);

/// Sample variance (divisor J - 1) of the entries of v; 0 for J < 2.
double sample_variance(const VectorXd& v);

/// T_u = V(gamma_d), T_d = V(gamma_u), T_m = min(V(gamma_u), V(gamma_d)).
double statistic(const DecompositionFit& fit, Hypothesis h);

struct Hyperparameters {
  int J = 0;            // MDCS basis size
  double lambda = 0.0;  // MDSS roughness penalty
  double mu = 0.0;
};

/// How the decomposition is fitted to the observed data. Hyperparameters
/// are either given or chosen once by cross-validation; the bootstrap
/// refits always reuse them.
struct TunerConfig {
  Method method = Method::MDSS;
  std::optional<Hyperparameters> fixed;
  std::optional<CvGrid> grid;  // defaults to CvGrid::defaults(n)
  CsStrategy cs_strategy = CsStrategy::JointJMu;
  SsStrategy ss_strategy = SsStrategy::JointLambdaMu;
  TuneOptions tune;
};

struct TestOptions {
  int R = 100;
  double alpha = 0.05;
  Hypothesis hypothesis = Hypothesis::IncreasingNull;
  Multiplier multiplier = Multiplier::Normal;
  /// Bootstrap statistics equal to the observed one (typically exact zeros
  /// from a flat component) count as exceedances with a uniform random
  /// weight drawn from the seed; false counts them fully (conservative).
  bool randomize_ties = true;
  std::uint64_t seed = 0;
  int threads = 1;
  FitOptions fit;
};

struct TestResult {
  double statistic = 0.0;
  /// Bootstrap statistics; +inf marks a replicate whose refit failed twice.
  std::vector<double> bootstrap;
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  Hypothesis hypothesis = Hypothesis::IncreasingNull;
  Multiplier multiplier = Multiplier::Normal;
  Method method = Method::MDSS;
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  int failed_replicates = 0;
  /// Weight given to bootstrap statistics tied with the observed one.
  double tie_weight = 1.0;
  /// Fit on the observed data.
  DecompositionFit fit;

  int R() const noexcept { return static_cast<int>(bootstrap.size()); }
};

/// p = (#{delta_r > T} + tie_weight * #{delta_r == T}) / R.
double bootstrap_p_value(double T, std::span<const double> deltas, double tie_weight = 1.0);

/// Wild-bootstrap test of the chosen null. Under the increasing null the
/// resamples are y* = yhat_u + c + eta * (y - yhat) with c = mean(yhat_u);
/// the decreasing null uses yhat_d, and the monotone null uses whichever
/// component has the larger coefficient variance.
TestResult wild_bootstrap_test(std::span<const double> x, const VectorXd& y,
                               const TunerConfig& tuner, const TestOptions& opts);

/// Same as above with the hyperparameters already chosen.
TestResult wild_bootstrap_test(const Decomposer& dec, const VectorXd& y,
                               const Hyperparameters& hyper, const TestOptions& opts);

/// Chooses hyperparameters for (x, y) per the tuner configuration.
Hyperparameters select_hyperparameters(std::span<const double> x, const VectorXd& y,
                                       const TunerConfig& tuner);

nlohmann::json to_json(const TestResult& r);

struct BhResult {
  std::vector<bool> rejected;
  double cutoff = 0.0;  // largest rejected p-value; 0 when none
};

/// Benjamini-Hochberg step-up at FDR level alpha.
BhResult bh_adjust(std::span<const double> p, double alpha);

struct EnrichInput {
  long long N = 0;  // reference list size
  long long n = 0;  // analysed set size
  long long M = 0;  // annotated in the reference list
  long long k = 0;  // annotated in the analysed set
};

/// P(X >= k) for X ~ Hypergeometric(N, M, n).
double hypergeom_enrich(const EnrichInput& e);

}  // namespace mdspline

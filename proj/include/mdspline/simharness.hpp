#pragma once

// Monte-Carlo experiments comparing monotone decomposition fits with their
// spline baselines (MSFE / MSPE / paired t / prop), and size/power studies
// of the monotonicity test. Every cell is a pure function of its
// configuration and master seed.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdspline/curves.hpp"
#include "mdspline/montest.hpp"
#include "mdspline/tuning.hpp"

namespace mdspline {

/// (1/n) sum (y_i - yhat_i)^2.
double msfe(const VectorXd& y, const VectorXd& yhat);

/// MSPE grid t_i = lo + (i - 1)(hi - lo)/N, i = 1..N.
std::vector<double> mspe_grid(double lo, double hi, int N);

/// (1/N) sum (fhat(t_i) - f(t_i))^2 over mspe_grid(lo, hi, N).
double mspe(const std::function<VectorXd(std::span<const double>)>& fhat,
            const std::function<VectorXd(std::span<const double>)>& f, double lo, double hi,
            int N);

enum class Direction { MdBetter, BaseBetter };
std::string_view to_string(Direction d);

struct PairedTTest {
  double t = 0.0;
  int df = 0;
  /// One-sided p-value; the side follows the sign of the sum of deltas.
  double p_value = 1.0;
  Direction direction = Direction::BaseBetter;
  /// Deltas had zero sample variance; p_value is then 1.
  bool zero_variance = false;
};

/// One-sample t on deltas = MSPE(MD) - MSPE(baseline). When the sum is
/// negative the alternative is mean < 0 (MD better), otherwise mean > 0.
PairedTTest paired_one_sided_t(std::span<const double> deltas);

/// "***" p < .001, "**" p < .01, "*" p < .05, "." p < .1, "" otherwise.
std::string_view significance_stars(double p);

enum class Baseline { CubicSpline, SmoothingSpline };
std::string_view to_string(Baseline b);

struct FitExperimentConfig {
  TruthSpec truth = NamedCurve{};
  double sigma = 1.0;
  int n = 100;
  int R = 100;
  int N_grid = 500;
  Baseline baseline = Baseline::CubicSpline;
  CsStrategy cs_strategy = CsStrategy::JointJMu;
  SsStrategy ss_strategy = SsStrategy::JointLambdaMu;
  /// Cross-validation grid; defaults to CvGrid::defaults(n).
  std::optional<CvGrid> grid;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Quantities from the known truth that bound the noise level above which
/// monotone decomposition is guaranteed to improve on the baseline,
/// averaged over replications (plug-in for the expectations).
struct ExperimentDiagnostics {
  // cubic-spline baseline
  double C1 = 0.0;
  double C2 = 0.0;
  double g = 0.0;
  double sigma2_threshold_cs = 0.0;
  /// Fraction of replications where the shrinkage family
  /// k yhat_ls + (1 - k) mean(yhat_ls), k < 1, beats least squares.
  double shrinkage_win_rate = 0.0;
  // smoothing-spline baseline
  double sigma2_threshold_ss = 0.0;
  /// Fraction of replications with sigma^2 above the threshold.
  double above_threshold = 0.0;
  int count = 0;
};

struct ExperimentRow {
  std::string truth;
  double sigma = 0.0;
  int n = 0;
  int R = 0;  // replications that succeeded
  int failures = 0;
  Baseline baseline = Baseline::CubicSpline;
  std::string strategy;
  MeanSe msfe_base;
  MeanSe msfe_md;
  MeanSe mspe_base;
  MeanSe mspe_md;
  PairedTTest test;
  double prop = 0.0;  // fraction of replications with MSPE(MD) < MSPE(baseline)
  /// Every delta was zero (e.g. noiseless data both methods fit exactly).
  bool degenerate = false;
  std::vector<double> deltas;
  ExperimentDiagnostics diagnostics;
};

ExperimentRow run_fit_experiment(const FitExperimentConfig& cfg);

/// Prop-4 style quantities for one dataset: f at x, design B and the
/// aggregation matrix G of the increasing component's ties.
struct CsBound {
  double C1 = 0.0;
  double C2 = 0.0;
  double g = 0.0;
  double sigma2_threshold = 0.0;
};
CsBound cs_noise_bound(const MatrixXd& B, const MatrixXd& G, const VectorXd& f);

/// Noise variance above which a shrinkage-factor decomposition beats the
/// smoothing spline with penalty lambda0.
double ss_noise_bound(const MatrixXd& B, const MatrixXd& Omega, double lambda0,
                      const VectorXd& f);

struct SizePowerCell {
  std::string truth;  // curve or kernel label
  double sigma = 0.1;
  int n = 100;
};

struct SizePowerConfig {
  std::vector<SizePowerCell> cells;
  int n_sims = 100;
  TunerConfig tuner;
  TestOptions test;  // R, alpha, hypothesis, multiplier; seed is derived per dataset
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RateRow {
  SizePowerCell cell;
  Method method = Method::MDSS;
  int n_sims = 0;
  int rejections = 0;
  int failures = 0;
  double rate = 0.0;  // rejections / successful simulations
  std::vector<double> p_values;
};

std::vector<RateRow> run_size_power_experiment(const SizePowerConfig& cfg);

/// Tables in the paper's column layout, one line per row.
std::string fit_table_tsv(std::span<const ExperimentRow> rows);
std::string rate_table_tsv(std::span<const RateRow> rows);
nlohmann::json to_json(const ExperimentRow& row);
nlohmann::json to_json(const RateRow& row);

/// Uniform sample of n points on [lo, hi] and the truth evaluated there
/// and, optionally, at extra points (jointly for Gaussian-process truths).
struct SimulatedData {
  std::vector<double> x;
  VectorXd f;        // truth at x
  VectorXd y;        // f + noise
  VectorXd f_extra;  // truth at the extra points
};
SimulatedData simulate_data(const TruthSpec& truth, int n, double sigma, std::uint64_t seed,
                            const std::function<std::vector<double>(std::span<const double>)>&
                                extra_points = {});

}  // namespace mdspline

#include "mdspline/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "mdspline/error.hpp"
#include "mdspline/format.hpp"
#include "mdspline/parallel.hpp"
#include "mdspline/rng.hpp"

namespace mdspline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return {kNaN, kNaN};
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) {
    out.se = kNaN;
    return out;
  }
  double ss = 0.0;
  for (double a : v) ss += (a - out.mean) * (a - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

VectorXd truth_at(const TruthSpec& truth, std::span<const double> x) {
  return eval_curve(std::get<NamedCurve>(truth), x);
}

}  // namespace

double msfe(const VectorXd& y, const VectorXd& yhat) {
  if (y.size() != yhat.size()) throw Error(ErrorCode::LengthMismatch, "msfe: |y| != |yhat|");
  if (y.size() == 0) throw Error(ErrorCode::InvalidArgument, "msfe: empty input");
  return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

std::vector<double> mspe_grid(double lo, double hi, int N) {
  if (N < 2) throw Error(ErrorCode::InvalidArgument, "MSPE grid needs N >= 2");
  std::vector<double> t(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) t[static_cast<std::size_t>(i)] = lo + i * (hi - lo) / N;
  return t;
}

double mspe(const std::function<VectorXd(std::span<const double>)>& fhat,
            const std::function<VectorXd(std::span<const double>)>& f, double lo, double hi,
            int N) {
  const auto t = mspe_grid(lo, hi, N);
  return msfe(f(t), fhat(t));
}

std::string_view to_string(Direction d) {
  return d == Direction::MdBetter ? "md_better" : "base_better";
}

PairedTTest paired_one_sided_t(std::span<const double> deltas) {
  if (deltas.size() < 2) throw Error(ErrorCode::InvalidArgument, "paired t needs >= 2 deltas");
  PairedTTest out;
  const double n = static_cast<double>(deltas.size());
  const double sum = std::accumulate(deltas.begin(), deltas.end(), 0.0);
  const double mean = sum / n;
  double ss = 0.0;
  for (double d : deltas) ss += (d - mean) * (d - mean);
  out.df = static_cast<int>(deltas.size()) - 1;
  out.direction = sum < 0.0 ? Direction::MdBetter : Direction::BaseBetter;
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) {
    out.zero_variance = true;
    out.t = kNaN;
    out.p_value = 1.0;
    return out;
  }
  out.t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(out.df);
  out.p_value = out.direction == Direction::MdBetter ? boost::math::cdf(dist, out.t)
                                                     : boost::math::cdf(boost::math::complement(dist, out.t));
  return out;
}

std::string_view significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

std::string_view to_string(Baseline b) {
  return b == Baseline::CubicSpline ? "cubic_spline" : "smoothing_spline";
}

void FitExperimentConfig::validate() const {
  if (R < 2) throw Error(ErrorCode::InvalidArgument, "R must be >= 2");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (n < 8) throw Error(ErrorCode::TooFewPoints, "n must be >= 8");
  if (N_grid < 2) throw Error(ErrorCode::InvalidArgument, "N_grid must be >= 2");
  if (threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");
}

SimulatedData simulate_data(const TruthSpec& truth, int n, double sigma, std::uint64_t seed,
                            const std::function<std::vector<double>(std::span<const double>)>&
                                extra_points) {
  const auto [lo, hi] = truth_domain(truth);
  SimulatedData d;
  d.x.resize(static_cast<std::size_t>(n));
  auto xr = make_engine(seed, {0});
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : d.x) v = u(xr);
  const std::vector<double> extra = extra_points ? extra_points(d.x) : std::vector<double>{};

  if (const auto* k = std::get_if<KernelSpec>(&truth)) {
    std::vector<double> all = d.x;
    all.insert(all.end(), extra.begin(), extra.end());
    const VectorXd f = gp_sample(*k, all, derive_seed(seed, {2}));
    d.f = f.head(n);
    d.f_extra = f.tail(static_cast<Eigen::Index>(extra.size()));
  } else {
    d.f = truth_at(truth, d.x);
    d.f_extra = truth_at(truth, extra);
  }
  auto er = make_engine(seed, {1});
  std::normal_distribution<double> nd(0.0, 1.0);
  d.y = d.f;
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y(i) += sigma * nd(er);
  return d;
}

CsBound cs_noise_bound(const MatrixXd& B, const MatrixXd& G, const VectorXd& f) {
  const MatrixXd M = B * G.transpose();
  const VectorXd Af = M * (M.transpose() * M).ldlt().solve(M.transpose() * f);
  const double n = static_cast<double>(f.size());
  const double J = static_cast<double>(G.cols());
  CsBound out;
  out.g = static_cast<double>(G.rows());
  const double fAf = f.dot(Af);
  out.C1 = std::max(0.0, fAf - f.sum() * f.sum() / n);
  out.C2 = std::max(0.0, f.squaredNorm() - fAf);
  const double g = out.g;
  const double a = out.C1 * (J - g) + out.C2 * (g + 1.0);
  const double delta = a * a + 4.0 * out.C1 * out.C2 * (g - 1.0) * (g - 1.0);
  const double denom = 2.0 * ((J - g) * (g + 1.0) + (g - 1.0) * (g - 1.0));
  out.sigma2_threshold =
      denom > 0.0 ? (-out.C1 * (J - g) + out.C2 * (g + 1.0) + std::sqrt(delta)) / denom : kNaN;
  return out;
}

double ss_noise_bound(const MatrixXd& B, const MatrixXd& Omega, double lambda0, const VectorXd& f) {
  const MatrixXd S = B.transpose() * B + lambda0 * Omega;
  const MatrixXd Q = B * S.ldlt().solve(B.transpose());
  const double n = static_cast<double>(f.size());
  const VectorXd ones = VectorXd::Ones(f.size());
  const VectorXd Qf = Q * f;
  const VectorXd w = f - Qf;
  // P v = v - 1 (1'Q v)/n
  const VectorXd Pw = w - ones * (ones.dot(Q * w) / n);
  const double num = Qf.dot(Pw);
  const MatrixXd Q2 = Q * Q;
  const double den = Q2.trace() - ones.dot(Q * (Q2 * ones)) / n;
  return den > 0.0 ? num / den : kNaN;
}

namespace {

struct RepOutcome {
  bool ok = false;
  double msfe_base = 0.0, msfe_md = 0.0, mspe_base = 0.0, mspe_md = 0.0;
  CsBound cs{};
  bool shrink_win = false;
  double ss_threshold = kNaN;
};

RepOutcome run_replication(const FitExperimentConfig& cfg, const CvGrid& grid, int rep) {
  const std::uint64_t rep_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep)});
  std::vector<double> grid_t;
  const auto data = simulate_data(cfg.truth, cfg.n, cfg.sigma, rep_seed,
                                  [&](std::span<const double> x) {
                                    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
                                    grid_t = mspe_grid(*mn, *mx, cfg.N_grid);
                                    return grid_t;
                                  });
  TuneOptions topts;
  topts.seed = derive_seed(rep_seed, {3});
  topts.threads = 1;

  RepOutcome out;
  if (cfg.baseline == Baseline::CubicSpline) {
    const auto base = tune_cubic_spline(data.x, data.y, grid, topts);
    const auto md = tune_mdcs(data.x, data.y, grid, cfg.cs_strategy, topts);
    out.msfe_base = msfe(data.y, base.fit.eval(data.x));
    out.msfe_md = msfe(data.y, md.fit.fitted);
    out.mspe_base = msfe(data.f_extra, base.fit.eval(grid_t));
    out.mspe_md = msfe(data.f_extra, predict(md.fit, grid_t).f);

    const MatrixXd B = design_matrix(md.fit.knots, data.x);
    const auto groups =
        detect_ties(md.fit.gamma_u, tie_tolerance(md.fit.gamma_u, md.fit.gamma_d));
    out.cs = cs_noise_bound(B, groups.aggregation_matrix(), data.f);

    // least squares on the same knots against the shrinkage family
    const VectorXd ls = B * B.colPivHouseholderQr().solve(data.y);
    const double mse_ls = (ls - data.f).squaredNorm();
    const double level = ls.mean();
    for (double k : grid.k_values) {
      if (k >= 1.0) continue;
      const VectorXd yk = (k * ls.array() + (1.0 - k) * level).matrix();
      if ((yk - data.f).squaredNorm() < mse_ls) {
        out.shrink_win = true;
        break;
      }
    }
  } else {
    const auto base = tune_smoothing_spline(data.x, data.y, grid, topts);
    const auto md = tune_mdss(data.x, data.y, grid, cfg.ss_strategy, topts);
    out.msfe_base = msfe(data.y, base.fit.eval(data.x));
    out.msfe_md = msfe(data.y, md.fit.fitted);
    out.mspe_base = msfe(data.f_extra, base.fit.eval(grid_t));
    out.mspe_md = msfe(data.f_extra, predict(md.fit, grid_t).f);

    const MatrixXd B = design_matrix(base.fit.knots, data.x);
    out.ss_threshold = ss_noise_bound(B, penalty_matrix(base.fit.knots), base.fit.lambda, data.f);
  }
  out.ok = true;
  return out;
}

}  // namespace

ExperimentRow run_fit_experiment(const FitExperimentConfig& cfg) {
  cfg.validate();
  if (const auto* c = std::get_if<NamedCurve>(&cfg.truth)) c->validate();
  if (const auto* k = std::get_if<KernelSpec>(&cfg.truth)) k->validate();
  CvGrid grid = cfg.grid ? *cfg.grid : CvGrid::defaults(cfg.n);
  if (grid.k_values.empty()) grid.k_values = CvGrid::defaults(cfg.n).k_values;

  std::vector<RepOutcome> reps(static_cast<std::size_t>(cfg.R));
  parallel_for(cfg.R, cfg.threads, [&](int r) {
    try {
      reps[static_cast<std::size_t>(r)] = run_replication(cfg, grid, r);
    } catch (const Error&) {
      reps[static_cast<std::size_t>(r)].ok = false;
    }
  });

  ExperimentRow row;
  row.truth = truth_label(cfg.truth);
  row.sigma = cfg.sigma;
  row.n = cfg.n;
  row.baseline = cfg.baseline;
  row.strategy = std::string(cfg.baseline == Baseline::CubicSpline ? to_string(cfg.cs_strategy)
                                                                   : to_string(cfg.ss_strategy));
  std::vector<double> fb, fm, pb, pm;
  ExperimentDiagnostics& dg = row.diagnostics;
  int above = 0;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++row.failures;
      continue;
    }
    fb.push_back(r.msfe_base);
    fm.push_back(r.msfe_md);
    pb.push_back(r.mspe_base);
    pm.push_back(r.mspe_md);
    row.deltas.push_back(r.mspe_md - r.mspe_base);
    ++dg.count;
    if (cfg.baseline == Baseline::CubicSpline) {
      dg.C1 += r.cs.C1;
      dg.C2 += r.cs.C2;
      dg.g += r.cs.g;
      dg.sigma2_threshold_cs += r.cs.sigma2_threshold;
      dg.shrinkage_win_rate += r.shrink_win ? 1.0 : 0.0;
      above += cfg.sigma * cfg.sigma > r.cs.sigma2_threshold;
    } else {
      dg.sigma2_threshold_ss += r.ss_threshold;
      above += cfg.sigma * cfg.sigma > r.ss_threshold;
    }
  }
  row.R = static_cast<int>(row.deltas.size());
  if (row.R < 2) {
    throw Error(ErrorCode::FitFailure, "fewer than two replications succeeded (" +
                                           std::to_string(row.failures) + " failed)");
  }
  const double cnt = static_cast<double>(dg.count);
  dg.C1 /= cnt;
  dg.C2 /= cnt;
  dg.g /= cnt;
  dg.sigma2_threshold_cs /= cnt;
  dg.shrinkage_win_rate /= cnt;
  dg.sigma2_threshold_ss /= cnt;
  dg.above_threshold = above / cnt;
  if (cfg.baseline == Baseline::CubicSpline) {
    dg.sigma2_threshold_ss = kNaN;
  } else {
    dg.C1 = dg.C2 = dg.g = dg.sigma2_threshold_cs = dg.shrinkage_win_rate = kNaN;
  }

  row.msfe_base = mean_se(fb);
  row.msfe_md = mean_se(fm);
  row.mspe_base = mean_se(pb);
  row.mspe_md = mean_se(pm);
  row.test = paired_one_sided_t(row.deltas);
  const auto wins = std::count_if(row.deltas.begin(), row.deltas.end(), [](double d) { return d < 0.0; });
  row.prop = static_cast<double>(wins) / row.R;
  double maxabs = 0.0;
  for (double d : row.deltas) maxabs = std::max(maxabs, std::abs(d));
  row.degenerate = maxabs <= 1e-8;
  return row;
}

std::vector<RateRow> run_size_power_experiment(const SizePowerConfig& cfg) {
  if (cfg.n_sims < 1) throw Error(ErrorCode::InvalidArgument, "n_sims must be >= 1");
  std::vector<TruthSpec> truths;
  for (const auto& c : cfg.cells) {
    truths.push_back(parse_truth(c.truth));
    if (c.n < 8) throw Error(ErrorCode::TooFewPoints, "n must be >= 8");
    if (!(c.sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  }
  const int ncell = static_cast<int>(cfg.cells.size());
  const int jobs = ncell * cfg.n_sims;
  std::vector<double> pv(static_cast<std::size_t>(jobs), kNaN);
  std::vector<char> rejected(static_cast<std::size_t>(jobs), 0);

  parallel_for(jobs, cfg.threads, [&](int job) {
    const int c = job / cfg.n_sims;
    const int s = job % cfg.n_sims;
    const auto& cell = cfg.cells[static_cast<std::size_t>(c)];
    const std::uint64_t sim_seed =
        derive_seed(cfg.seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(s)});
    try {
      const auto data = simulate_data(truths[static_cast<std::size_t>(c)], cell.n, cell.sigma, sim_seed);
      TunerConfig tuner = cfg.tuner;
      tuner.tune.seed = derive_seed(sim_seed, {3});
      tuner.tune.threads = 1;
      TestOptions opts = cfg.test;
      opts.seed = derive_seed(sim_seed, {4});
      opts.threads = 1;
      const auto res = wild_bootstrap_test(data.x, data.y, tuner, opts);
      pv[static_cast<std::size_t>(job)] = res.p_value;
      rejected[static_cast<std::size_t>(job)] = res.reject;
    } catch (const Error&) {
      // counted as a failure below
    }
  });

  std::vector<RateRow> rows;
  for (int c = 0; c < ncell; ++c) {
    RateRow row;
    row.cell = cfg.cells[static_cast<std::size_t>(c)];
    row.method = cfg.tuner.method;
    for (int s = 0; s < cfg.n_sims; ++s) {
      const auto job = static_cast<std::size_t>(c * cfg.n_sims + s);
      if (std::isnan(pv[job])) {
        ++row.failures;
        continue;
      }
      row.p_values.push_back(pv[job]);
      row.rejections += rejected[job];
    }
    row.n_sims = static_cast<int>(row.p_values.size());
    row.rate = row.n_sims > 0 ? static_cast<double>(row.rejections) / row.n_sims : kNaN;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fit_table_tsv(std::span<const ExperimentRow> rows) {
  std::ostringstream os;
  os << "truth\tsigma\tn\tR\tbaseline\tstrategy\tmsfe_base\tmsfe_base_se\tmsfe_md\tmsfe_md_se"
        "\tmspe_base\tmspe_base_se\tmspe_md\tmspe_md_se\tp_value\tsignif\tprop\tdirection"
        "\tfailures\n";
  for (const auto& r : rows) {
    os << r.truth << '\t' << format_double(r.sigma) << '\t' << r.n << '\t' << r.R << '\t'
       << to_string(r.baseline) << '\t' << r.strategy << '\t' << format_double(r.msfe_base.mean)
       << '\t' << format_double(r.msfe_base.se) << '\t' << format_double(r.msfe_md.mean) << '\t'
       << format_double(r.msfe_md.se) << '\t' << format_double(r.mspe_base.mean) << '\t'
       << format_double(r.mspe_base.se) << '\t' << format_double(r.mspe_md.mean) << '\t'
       << format_double(r.mspe_md.se) << '\t' << format_double(r.test.p_value) << '\t'
       << significance_stars(r.test.p_value) << '\t' << format_double(r.prop) << '\t'
       << to_string(r.test.direction) << '\t' << r.failures << '\n';
  }
  return os.str();
}

std::string rate_table_tsv(std::span<const RateRow> rows) {
  std::ostringstream os;
  os << "truth\tsigma\tn\tmethod\tn_sims\trejections\tfailures\trate\n";
  for (const auto& r : rows) {
    os << r.cell.truth << '\t' << format_double(r.cell.sigma) << '\t' << r.cell.n << '\t'
       << to_string(r.method) << '\t' << r.n_sims << '\t' << r.rejections << '\t' << r.failures
       << '\t' << format_double(r.rate) << '\n';
  }
  return os.str();
}

namespace {

nlohmann::json num(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json ms(const MeanSe& m) { return {{"mean", num(m.mean)}, {"se", num(m.se)}}; }

}  // namespace

nlohmann::json to_json(const ExperimentRow& r) {
  const auto& d = r.diagnostics;
  return {
      {"truth", r.truth},
      {"sigma", r.sigma},
      {"n", r.n},
      {"R", r.R},
      {"failures", r.failures},
      {"baseline", to_string(r.baseline)},
      {"strategy", r.strategy},
      {"msfe_base", ms(r.msfe_base)},
      {"msfe_md", ms(r.msfe_md)},
      {"mspe_base", ms(r.mspe_base)},
      {"mspe_md", ms(r.mspe_md)},
      {"t_test",
       {{"t", num(r.test.t)},
        {"df", r.test.df},
        {"p_value", r.test.p_value},
        {"direction", to_string(r.test.direction)},
        {"zero_variance", r.test.zero_variance}}},
      {"prop", r.prop},
      {"degenerate", r.degenerate},
      {"deltas", r.deltas},
      {"diagnostics",
       {{"C1", num(d.C1)},
        {"C2", num(d.C2)},
        {"g", num(d.g)},
        {"sigma2_threshold_cs", num(d.sigma2_threshold_cs)},
        {"shrinkage_win_rate", num(d.shrinkage_win_rate)},
        {"sigma2_threshold_ss", num(d.sigma2_threshold_ss)},
        {"above_threshold", num(d.above_threshold)},
        {"replications", d.count}}},
  };
}

nlohmann::json to_json(const RateRow& r) {
  return {
      {"truth", r.cell.truth}, {"sigma", r.cell.sigma},       {"n", r.cell.n},
      {"method", to_string(r.method)}, {"n_sims", r.n_sims}, {"rejections", r.rejections},
      {"failures", r.failures},        {"rate", num(r.rate)}, {"p_values", r.p_values},
  };
}

}  // namespace mdspline

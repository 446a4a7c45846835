#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "io.hpp"
#include "mdspline/curves.hpp"
#include "mdspline/decomposition.hpp"
#include "mdspline/error.hpp"
#include "mdspline/format.hpp"
#include "mdspline/montest.hpp"
#include "mdspline/parallel.hpp"
#include "mdspline/rng.hpp"
#include "mdspline/simharness.hpp"
#include "mdspline/tuning.hpp"

#ifndef MDSPLINE_VERSION
#define MDSPLINE_VERSION "unknown"
#endif

namespace mdspline::cli {

namespace {

using nlohmann::json;

constexpr int kCurvePoints = 500;

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;
  std::string stem;
};

struct GridArgs {
  std::vector<double> mu;
  std::vector<int> J;
  std::vector<double> lambda;
  std::vector<double> k;
  std::optional<int> folds;
};

struct ModelArgs {
  std::string method = "mdss";
  std::string strategy = "joint";
  GridArgs grid;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Master random seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--out-dir", c.out_dir,
                  "Output directory (default: $MDSPLINE_OUT_DIR or the current directory)");
  sub->add_option("--out", c.stem, "Stem for output file names (default: the command name)");
}

void add_model(CLI::App* sub, ModelArgs& m) {
  sub->add_option("--method", m.method, "Decomposition basis")
      ->check(CLI::IsMember({"mdcs", "mdss"}))
      ->capture_default_str();
  sub->add_option("--strategy", m.strategy,
                  "Tuning strategy: joint, fix (tune J or lambda first, then mu) or "
                  "shrinkage (mdss only)")
      ->check(CLI::IsMember({"joint", "fix", "shrinkage"}))
      ->capture_default_str();
  sub->add_option("--mu", m.grid.mu, "Comma-separated mu grid")->delimiter(',');
  sub->add_option("--J", m.grid.J, "Comma-separated basis-size grid (mdcs)")->delimiter(',');
  sub->add_option("--lambda", m.grid.lambda, "Comma-separated lambda grid (mdss)")->delimiter(',');
  sub->add_option("--k", m.grid.k, "Comma-separated shrinkage-factor grid (mdss)")->delimiter(',');
  sub->add_option("--folds", m.grid.folds, "Cross-validation folds; 0 means leave-one-out")
      ->check(CLI::NonNegativeNumber);
}

std::filesystem::path out_dir_of(const Common& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv("MDSPLINE_OUT_DIR"); env && *env) return env;
  return ".";
}

Manifest make_manifest(const std::string& command, const Common& c) {
  Manifest m(command, out_dir_of(c), c.stem.empty() ? command : c.stem);
  m.set_seed(c.seed);
  m.set_threads(c.threads);
  return m;
}

Method parse_method(const std::string& s) { return s == "mdcs" ? Method::MDCS : Method::MDSS; }

CsStrategy cs_strategy(const std::string& s) {
  if (s == "joint") return CsStrategy::JointJMu;
  if (s == "fix") return CsStrategy::FixJThenMu;
  throw UsageError("strategy '" + s + "' is not available for mdcs (use joint or fix)");
}

SsStrategy ss_strategy(const std::string& s) {
  if (s == "joint") return SsStrategy::JointLambdaMu;
  if (s == "fix") return SsStrategy::FixLambdaThenMu;
  return SsStrategy::ShrinkageFactor;
}

std::string strategy_name(const ModelArgs& m) {
  return parse_method(m.method) == Method::MDCS ? std::string(to_string(cs_strategy(m.strategy)))
                                                : std::string(to_string(ss_strategy(m.strategy)));
}

CvGrid make_grid(const GridArgs& g, int n) {
  CvGrid grid = CvGrid::defaults(n);
  if (!g.mu.empty()) grid.mu_values = g.mu;
  if (!g.J.empty()) grid.J_values = g.J;
  if (!g.lambda.empty()) grid.lambda_values = g.lambda;
  if (!g.k.empty()) grid.k_values = g.k;
  if (g.folds) grid.folds = *g.folds;
  return grid;
}

json grid_json(const CvGrid& g) {
  return {{"mu", g.mu_values},
          {"J", g.J_values},
          {"lambda", g.lambda_values},
          {"k", g.k_values},
          {"folds", g.folds}};
}

TunerConfig make_tuner(const ModelArgs& m, const CvGrid& grid, std::uint64_t seed, int threads) {
  TunerConfig t;
  t.method = parse_method(m.method);
  t.grid = grid;
  if (t.method == Method::MDCS) {
    t.cs_strategy = cs_strategy(m.strategy);
  } else {
    t.ss_strategy = ss_strategy(m.strategy);
  }
  t.tune.seed = seed;
  t.tune.threads = threads;
  return t;
}

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- fit

struct FitArgs {
  Common common;
  ModelArgs model;
  std::string input;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  auto m = make_manifest("fit", a.common);
  m.add_input(a.input);
  const auto table = read_numeric_csv(a.input);
  const auto& x = table.column("x");
  const VectorXd y = to_vector(table.column("y"));
  const CvGrid grid = make_grid(a.model.grid, static_cast<int>(x.size()));
  const std::string strategy = strategy_name(a.model);
  m.config() = {{"input", a.input},
                {"method", a.model.method},
                {"strategy", strategy},
                {"grid", grid_json(grid)}};

  TuneOptions topts;
  topts.seed = a.common.seed;
  topts.threads = a.common.threads;
  const TuneResult res = parse_method(a.model.method) == Method::MDCS
                             ? tune_mdcs(x, y, grid, cs_strategy(a.model.strategy), topts)
                             : tune_mdss(x, y, grid, ss_strategy(a.model.strategy), topts);

  json j = to_json(res.fit);
  j["strategy"] = strategy;
  j["cv_error"] = res.surface.best().error;
  j["manifest"] = m.file_name();
  m.write_output(m.stem() + ".json", dump(j));

  std::vector<double> t(kCurvePoints);
  const double lo = res.fit.knots.lo();
  const double hi = res.fit.knots.hi();
  for (int i = 0; i < kCurvePoints; ++i) {
    t[static_cast<std::size_t>(i)] = i == kCurvePoints - 1 ? hi : lo + (hi - lo) * i / (kCurvePoints - 1);
  }
  const auto pred = predict(res.fit, t);
  std::ostringstream curve;
  curve << "t\tf\tf_up\tf_down\n";
  for (int i = 0; i < kCurvePoints; ++i) {
    curve << format_double(t[static_cast<std::size_t>(i)]) << '\t' << format_double(pred.f(i))
          << '\t' << format_double(pred.f_up(i)) << '\t' << format_double(pred.f_down(i)) << '\n';
  }
  m.write_output(m.stem() + "_curve.tsv", curve.str());
  m.write_output(m.stem() + "_cv.tsv", res.surface.to_tsv());
  if (res.baseline) m.write_output(m.stem() + "_cv_stage1.tsv", res.baseline->to_tsv());
  m.finish();

  out << "fit: " << to_string(res.fit.method) << ' ' << strategy << " J=" << res.fit.basis_size()
      << " lambda=" << format_double(res.fit.lambda) << " mu=" << format_double(res.fit.mu)
      << " cv_error=" << format_double(res.surface.best().error) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- test

struct TestArgs {
  Common common;
  ModelArgs model;
  std::string input;
  std::string hypothesis = "increasing";
  std::string multiplier = "normal";
  std::string ties = "randomized";
  int R = 100;
  double alpha = 0.05;
};

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
}

int cmd_test(const TestArgs& a, std::ostream& out) {
  check_alpha(a.alpha);
  auto m = make_manifest("test", a.common);
  m.add_input(a.input);
  const auto table = read_numeric_csv(a.input);
  const auto& x = table.column("x");
  const VectorXd y = to_vector(table.column("y"));
  const CvGrid grid = make_grid(a.model.grid, static_cast<int>(x.size()));
  const std::string strategy = strategy_name(a.model);
  m.config() = {{"input", a.input},       {"method", a.model.method},
                {"strategy", strategy},   {"grid", grid_json(grid)},
                {"hypothesis", a.hypothesis}, {"multiplier", a.multiplier},
                {"ties", a.ties},         {"R", a.R},
                {"alpha", a.alpha}};

  const TunerConfig tuner = make_tuner(a.model, grid, derive_seed(a.common.seed, {0}), a.common.threads);
  TestOptions opts;
  opts.R = a.R;
  opts.alpha = a.alpha;
  opts.hypothesis = parse_hypothesis(a.hypothesis);
  opts.multiplier = a.multiplier == "normal" ? Multiplier::Normal : Multiplier::Rademacher;
  opts.randomize_ties = a.ties == "randomized";
  opts.seed = a.common.seed;
  opts.threads = a.common.threads;
  const TestResult res = wild_bootstrap_test(x, y, tuner, opts);

  json j = to_json(res);
  j["strategy"] = strategy;
  j["manifest"] = m.file_name();
  m.write_output(m.stem() + ".json", dump(j));
  std::ostringstream boot;
  boot << "replicate\tdelta\n";
  for (std::size_t r = 0; r < res.bootstrap.size(); ++r) {
    boot << r + 1 << '\t' << format_double(res.bootstrap[r]) << '\n';
  }
  m.write_output(m.stem() + "_bootstrap.tsv", boot.str());
  m.finish();

  out << "test: " << a.hypothesis << " null, T=" << format_double(res.statistic)
      << " p=" << format_double(res.p_value) << " reject=" << (res.reject ? "true" : "false") << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common common;
  std::string spec;
};

template <class T>
T spec_get(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::optional<CvGrid> spec_grid(const json& spec, int n) {
  if (!spec.contains("grid")) return std::nullopt;
  const json& g = spec.at("grid");
  GridArgs ga;
  ga.mu = spec_get(g, "mu", std::vector<double>{});
  ga.J = spec_get(g, "J", std::vector<int>{});
  ga.lambda = spec_get(g, "lambda", std::vector<double>{});
  ga.k = spec_get(g, "k", std::vector<double>{});
  if (g.contains("folds")) ga.folds = g.at("folds").get<int>();
  return make_grid(ga, n);
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto m = make_manifest("simulate", a.common);
  m.add_input(a.spec);
  json spec;
  try {
    spec = json::parse(read_file(a.spec));
  } catch (const json::parse_error& e) {
    throw DataError("spec '" + a.spec + "' is not valid JSON: " + e.what());
  }
  m.config() = spec;
  const std::string kind = spec_get<std::string>(spec, "experiment", "fit");
  const auto curves = spec.at("curves").get<std::vector<std::string>>();
  const auto sigmas = spec.at("sigmas").get<std::vector<double>>();
  for (const auto& c : curves) parse_truth(c);  // fail fast on unknown labels

  json diag = json::array();
  std::string table;
  if (kind == "fit") {
    const int n = spec_get(spec, "n", 100);
    const std::string baseline = spec_get<std::string>(spec, "baseline", "cubic_spline");
    if (baseline != "cubic_spline" && baseline != "smoothing_spline") {
      throw DataError("spec: baseline must be cubic_spline or smoothing_spline");
    }
    ModelArgs model;
    model.method = baseline == "cubic_spline" ? "mdcs" : "mdss";
    model.strategy = spec_get<std::string>(spec, "strategy", "joint");
    std::vector<ExperimentRow> rows;
    std::uint64_t index = 0;
    for (const auto& c : curves) {
      for (double sigma : sigmas) {
        FitExperimentConfig cfg;
        cfg.truth = parse_truth(c);
        cfg.sigma = sigma;
        cfg.n = n;
        cfg.R = spec_get(spec, "R", 100);
        cfg.N_grid = spec_get(spec, "N_grid", 500);
        cfg.baseline = baseline == "cubic_spline" ? Baseline::CubicSpline : Baseline::SmoothingSpline;
        if (cfg.baseline == Baseline::CubicSpline) {
          cfg.cs_strategy = cs_strategy(model.strategy);
        } else {
          cfg.ss_strategy = ss_strategy(model.strategy);
        }
        cfg.grid = spec_grid(spec, n);
        cfg.seed = derive_seed(a.common.seed, {index++});
        cfg.threads = a.common.threads;
        rows.push_back(run_fit_experiment(cfg));
        diag.push_back(to_json(rows.back()));
      }
    }
    table = fit_table_tsv(rows);
  } else if (kind == "size_power") {
    SizePowerConfig cfg;
    const auto ns = spec.contains("ns") ? spec.at("ns").get<std::vector<int>>()
                                        : std::vector<int>{spec_get(spec, "n", 100)};
    for (const auto& c : curves) {
      for (double s : sigmas) {
        for (int n : ns) cfg.cells.push_back({c, s, n});
      }
    }
    cfg.n_sims = spec_get(spec, "n_sims", 100);
    ModelArgs model;
    model.method = spec_get<std::string>(spec, "method", "mdss");
    if (model.method != "mdcs" && model.method != "mdss") throw DataError("spec: method must be mdcs or mdss");
    model.strategy = spec_get<std::string>(spec, "strategy", "joint");
    const int n0 = ns.empty() ? 100 : ns.front();
    cfg.tuner = make_tuner(model, spec_grid(spec, n0).value_or(CvGrid{}), 0, 1);
    if (!spec.contains("grid")) cfg.tuner.grid.reset();
    cfg.test.R = spec_get(spec, "R", 100);
    cfg.test.alpha = spec_get(spec, "alpha", 0.05);
    if (cfg.test.R < 1) throw DataError("spec: R must be >= 1");
    if (!(cfg.test.alpha > 0.0 && cfg.test.alpha < 1.0)) throw DataError("spec: alpha must lie in (0, 1)");
    cfg.test.hypothesis = parse_hypothesis(spec_get<std::string>(spec, "hypothesis", "increasing"));
    cfg.seed = a.common.seed;
    cfg.threads = a.common.threads;
    const auto rows = run_size_power_experiment(cfg);
    for (const auto& r : rows) diag.push_back(to_json(r));
    table = rate_table_tsv(rows);
  } else {
    throw DataError("spec: experiment must be 'fit' or 'size_power'");
  }
  m.write_output(m.stem() + ".tsv", table);
  m.write_output(m.stem() + "_diagnostics.json",
                 dump({{"experiment", kind}, {"rows", diag}, {"manifest", m.file_name()}}));
  m.finish();
  out << "simulate: " << diag.size() << " row(s)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- screen

struct ScreenArgs {
  Common common;
  ModelArgs model;
  std::string input;
  std::string annotation;
  std::string hypothesis = "monotone";
  int R = 100;
  double alpha = 0.05;
};

int cmd_screen(const ScreenArgs& a, std::ostream& out) {
  check_alpha(a.alpha);
  auto m = make_manifest("screen", a.common);
  m.add_input(a.input);
  const auto table = read_numeric_csv(a.input);
  if (table.header.size() < 2) throw DataError("screen input needs a time column and at least one series");
  const auto& x = table.columns.front();
  const int n = static_cast<int>(x.size());
  const CvGrid grid = make_grid(a.model.grid, n);
  m.config() = {{"input", a.input},
                {"annotation", a.annotation},
                {"method", a.model.method},
                {"strategy", strategy_name(a.model)},
                {"grid", grid_json(grid)},
                {"hypothesis", a.hypothesis},
                {"R", a.R},
                {"alpha", a.alpha}};

  const std::size_t S = table.header.size() - 1;
  std::vector<double> pval(S, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> stat(S, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> status(S, "ok");
  const Hypothesis hyp = parse_hypothesis(a.hypothesis);
  parallel_for(static_cast<int>(S), a.common.threads, [&](int s) {
    const auto si = static_cast<std::size_t>(s);
    const std::uint64_t seed = derive_seed(a.common.seed, {si});
    try {
      const TunerConfig tuner = make_tuner(a.model, grid, derive_seed(seed, {0}), 1);
      TestOptions opts;
      opts.R = a.R;
      opts.alpha = a.alpha;
      opts.hypothesis = hyp;
      opts.seed = seed;
      const auto res = wild_bootstrap_test(x, to_vector(table.columns[si + 1]), tuner, opts);
      pval[si] = res.p_value;
      stat[si] = res.statistic;
    } catch (const Error& e) {
      status[si] = std::string("failed: ") + std::string(to_string(e.code()));
    }
  });

  std::vector<std::size_t> tested;
  std::vector<double> tested_p;
  for (std::size_t s = 0; s < S; ++s) {
    if (status[s] == "ok") {
      tested.push_back(s);
      tested_p.push_back(pval[s]);
    }
  }
  const BhResult bh = bh_adjust(tested_p, a.alpha);
  std::vector<bool> rejected(S, false);
  for (std::size_t i = 0; i < tested.size(); ++i) rejected[tested[i]] = bh.rejected[i];

  std::ostringstream tsv;
  tsv << "series\tstatistic\tp_value\tbh_reject\tstatus\n";
  for (std::size_t s = 0; s < S; ++s) {
    tsv << table.header[s + 1] << '\t' << format_double(stat[s]) << '\t' << format_double(pval[s])
        << '\t' << (rejected[s] ? "true" : "false") << '\t' << status[s] << '\n';
  }
  m.write_output(m.stem() + ".tsv", tsv.str());

  json enrichment = nullptr;
  std::string enrichment_note;
  if (!a.annotation.empty()) {
    m.add_input(a.annotation);
    const auto ann = read_string_csv(a.annotation);
    if (ann.rows.empty()) {
      enrichment_note = "enrichment skipped: annotation file has no rows";
    } else {
      const auto col = [&](const char* name) {
        const auto it = std::find(ann.header.begin(), ann.header.end(), name);
        if (it == ann.header.end()) throw DataError(std::string("annotation: missing column '") + name + "'");
        return static_cast<std::size_t>(it - ann.header.begin());
      };
      const std::size_t cs = col("series");
      const std::size_t ct = col("term");
      std::map<std::string, std::size_t> index;
      for (std::size_t i : tested) index[table.header[i + 1]] = i;
      std::map<std::string, std::set<std::size_t>> terms;
      int unknown = 0;
      for (const auto& row : ann.rows) {
        const auto it = index.find(row[cs]);
        if (it == index.end()) {
          ++unknown;
          terms[row[ct]];  // keep the term even if none of its series were tested
          continue;
        }
        terms[row[ct]].insert(it->second);
      }
      if (unknown > 0) {
        m.note(std::to_string(unknown) + " annotation row(s) name series that were not tested");
      }
      const long long N = static_cast<long long>(tested.size());
      const long long nsel = std::count(rejected.begin(), rejected.end(), true);
      std::vector<double> tp;
      std::vector<std::array<long long, 2>> mk;
      for (const auto& [term, members] : terms) {
        const long long M = static_cast<long long>(members.size());
        long long k = 0;
        for (std::size_t s : members) k += rejected[s];
        tp.push_back(hypergeom_enrich({.N = N, .n = nsel, .M = M, .k = k}));
        mk.push_back({M, k});
      }
      const BhResult tbh = bh_adjust(tp, a.alpha);
      std::ostringstream et;
      et << "term\tN\tn\tM\tk\tp_value\tbh_reject\n";
      enrichment = json::array();
      std::size_t i = 0;
      for (const auto& [term, members] : terms) {
        et << term << '\t' << N << '\t' << nsel << '\t' << mk[i][0] << '\t' << mk[i][1] << '\t'
           << format_double(tp[i]) << '\t' << (tbh.rejected[i] ? "true" : "false") << '\n';
        enrichment.push_back({{"term", term},
                              {"N", N},
                              {"n", nsel},
                              {"M", mk[i][0]},
                              {"k", mk[i][1]},
                              {"p_value", tp[i]},
                              {"bh_reject", static_cast<bool>(tbh.rejected[i])}});
        ++i;
      }
      m.write_output(m.stem() + "_enrichment.tsv", et.str());
    }
  } else {
    enrichment_note = "enrichment skipped: no annotation file";
  }
  if (!enrichment_note.empty()) m.note(enrichment_note);

  json series = json::array();
  for (std::size_t s = 0; s < S; ++s) {
    series.push_back({{"series", table.header[s + 1]},
                      {"statistic", std::isfinite(stat[s]) ? json(stat[s]) : json(nullptr)},
                      {"p_value", std::isfinite(pval[s]) ? json(pval[s]) : json(nullptr)},
                      {"bh_reject", static_cast<bool>(rejected[s])},
                      {"status", status[s]}});
  }
  json summary = {{"hypothesis", a.hypothesis},
                  {"alpha", a.alpha},
                  {"n_series", S},
                  {"n_tested", tested.size()},
                  {"n_rejected", std::count(rejected.begin(), rejected.end(), true)},
                  {"bh_cutoff", bh.cutoff},
                  {"series", series},
                  {"enrichment", enrichment},
                  {"manifest", m.file_name()}};
  if (!enrichment_note.empty()) summary["enrichment_note"] = enrichment_note;
  m.write_output(m.stem() + ".json", dump(summary));
  m.finish();
  out << "screen: " << summary["n_rejected"].get<long long>() << " of " << S
      << " series rejected at FDR " << format_double(a.alpha) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  Common common;
  std::string curve;
  std::string kernel;
  int n = 100;
  double sigma = 0.1;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.curve.empty() == a.kernel.empty()) throw UsageError("give exactly one of --curve or --kernel");
  if (!(a.sigma >= 0.0)) throw UsageError("--sigma must be >= 0");
  auto m = make_manifest("gen", a.common);
  const TruthSpec truth = a.curve.empty() ? TruthSpec{KernelSpec::parse(a.kernel)}
                                          : TruthSpec{NamedCurve::parse(a.curve)};
  m.config() = {{"truth", truth_label(truth)}, {"n", a.n}, {"sigma", a.sigma}};
  const auto d = simulate_data(truth, a.n, a.sigma, a.common.seed);
  std::vector<std::size_t> order(d.x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return d.x[i] < d.x[j]; });
  std::ostringstream csv;
  csv << "x,y,truth\n";
  for (std::size_t i : order) {
    const auto e = static_cast<Eigen::Index>(i);
    csv << format_double(d.x[i]) << ',' << format_double(d.y(e)) << ',' << format_double(d.f(e)) << '\n';
  }
  m.write_output(m.stem() + ".csv", csv.str());
  m.finish();
  out << "gen: " << a.n << " rows of " << truth_label(truth) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monotone decomposition with cubic and smoothing splines", "mdspline"};
  app.set_version_flag("--version", MDSPLINE_VERSION);
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a monotone decomposition to x,y data");
  add_common(fit_cmd, fit.common);
  add_model(fit_cmd, fit.model);
  fit_cmd->add_option("input", fit.input, "CSV with columns x,y")->required();

  TestArgs test;
  auto* test_cmd = app.add_subcommand("test", "Wild-bootstrap monotonicity test on x,y data");
  add_common(test_cmd, test.common);
  add_model(test_cmd, test.model);
  test_cmd->add_option("input", test.input, "CSV with columns x,y")->required();
  test_cmd->add_option("--hypothesis", test.hypothesis, "Null hypothesis")
      ->check(CLI::IsMember({"increasing", "decreasing", "monotone"}))
      ->capture_default_str();
  test_cmd->add_option("--R", test.R, "Bootstrap replicates")->check(CLI::PositiveNumber)->capture_default_str();
  test_cmd->add_option("--alpha", test.alpha, "Significance level")->capture_default_str();
  test_cmd->add_option("--multiplier", test.multiplier, "Wild-bootstrap multiplier")
      ->check(CLI::IsMember({"normal", "rademacher"}))
      ->capture_default_str();
  test_cmd->add_option("--ties", test.ties, "Bootstrap statistics equal to the observed one")
      ->check(CLI::IsMember({"randomized", "conservative"}))
      ->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte-Carlo experiment from a JSON spec");
  add_common(sim_cmd, sim.common);
  sim_cmd->add_option("spec", sim.spec, "Experiment spec (JSON)")->required();

  ScreenArgs screen;
  auto* screen_cmd = app.add_subcommand("screen", "Test many series for monotonicity with FDR control");
  add_common(screen_cmd, screen.common);
  add_model(screen_cmd, screen.model);
  screen_cmd->add_option("input", screen.input, "CSV: time column followed by one column per series")
      ->required();
  screen_cmd->add_option("--annotation", screen.annotation, "CSV with columns series,term");
  screen_cmd->add_option("--hypothesis", screen.hypothesis, "Null hypothesis per series")
      ->check(CLI::IsMember({"increasing", "decreasing", "monotone"}))
      ->capture_default_str();
  screen_cmd->add_option("--R", screen.R, "Bootstrap replicates")->check(CLI::PositiveNumber)->capture_default_str();
  screen_cmd->add_option("--alpha", screen.alpha, "Test level and FDR level")->capture_default_str();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate synthetic data from a curve or a GP kernel");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--curve", gen.curve, "Curve label, e.g. x3, sigmoid, bowman-0.45, ghosal-m2");
  gen_cmd->add_option("--kernel", gen.kernel, "Kernel label, e.g. SE-0.1, Mat32-1, Periodic-0.1-4");
  gen_cmd->add_option("--n", gen.n, "Sample size")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--sigma", gen.sigma, "Noise standard deviation")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (test_cmd->parsed()) return cmd_test(test, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (screen_cmd->parsed()) return cmd_screen(screen, out);
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace mdspline::cli

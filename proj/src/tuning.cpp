#include "mdspline/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mdspline/error.hpp"
#include "mdspline/format.hpp"
#include "mdspline/parallel.hpp"
#include "mdspline/rng.hpp"

namespace mdspline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Fold {
  std::vector<double> x_train;
  VectorXd y_train;
  std::vector<double> x_test;
  VectorXd y_test;
};

std::vector<Fold> make_folds(std::span<const double> x, const VectorXd& y, int folds,
                             std::uint64_t seed, bool clamp) {
  const int n = static_cast<int>(x.size());
  if (y.size() != n) throw Error(ErrorCode::LengthMismatch, "|y| must equal |x|");
  if (folds < 2 || folds > n) {
    throw Error(ErrorCode::InvalidArgument,
                "folds must lie in [2, n]; got " + std::to_string(folds) + " for n = " +
                    std::to_string(n));
  }
  const auto label = fold_assignment(n, folds, seed);
  std::vector<Fold> out(static_cast<std::size_t>(folds));
  std::vector<std::vector<double>> ytr(out.size());
  std::vector<std::vector<double>> yte(out.size());
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < folds; ++f) {
      auto& fold = out[static_cast<std::size_t>(f)];
      if (label[static_cast<std::size_t>(i)] == f) {
        fold.x_test.push_back(x[static_cast<std::size_t>(i)]);
        yte[static_cast<std::size_t>(f)].push_back(y(i));
      } else {
        fold.x_train.push_back(x[static_cast<std::size_t>(i)]);
        ytr[static_cast<std::size_t>(f)].push_back(y(i));
      }
    }
  }
  for (std::size_t f = 0; f < out.size(); ++f) {
    auto& fold = out[f];
    fold.y_train = Eigen::Map<VectorXd>(ytr[f].data(), static_cast<Eigen::Index>(ytr[f].size()));
    fold.y_test = Eigen::Map<VectorXd>(yte[f].data(), static_cast<Eigen::Index>(yte[f].size()));
    if (clamp && !fold.x_train.empty()) {
      const auto [lo, hi] = std::minmax_element(fold.x_train.begin(), fold.x_train.end());
      for (double& t : fold.x_test) t = std::clamp(t, *lo, *hi);
    }
  }
  return out;
}

/// Sum of per-fold SSE vectors in fold order; NaN marks a failed cell.
VectorXd accumulate_folds(const std::vector<Fold>& folds, Eigen::Index ncells, int threads,
                          const std::function<VectorXd(const Fold&)>& fn) {
  std::vector<VectorXd> per(folds.size());
  parallel_for(static_cast<int>(folds.size()), threads,
               [&](int f) { per[static_cast<std::size_t>(f)] = fn(folds[static_cast<std::size_t>(f)]); });
  VectorXd total = VectorXd::Zero(ncells);
  for (const auto& v : per) total += v;
  return total;
}

bool better(const CvCell& a, const CvCell& b) {
  if (a.failed) return false;
  if (b.failed) return true;
  const double tol = 1e-12 * std::max(std::abs(a.error), std::abs(b.error));
  if (std::abs(a.error - b.error) > tol) return a.error < b.error;
  // equal error: least discrepancy penalty, then the simplest spline
  if (a.mu != b.mu) return a.mu < b.mu;
  if (a.J != b.J) return a.J < b.J;
  return a.lambda > b.lambda;
}

void finalize(CvSurface& s, const VectorXd& sse, int n) {
  for (std::size_t i = 0; i < s.cells.size(); ++i) {
    const double v = sse(static_cast<Eigen::Index>(i));
    s.cells[i].failed = !std::isfinite(v);
    s.cells[i].error = s.cells[i].failed ? kNaN : v / n;
  }
  std::size_t best = s.cells.size();
  for (std::size_t i = 0; i < s.cells.size(); ++i) {
    if (best == s.cells.size() ? !s.cells[i].failed : better(s.cells[i], s.cells[best])) best = i;
  }
  if (best == s.cells.size()) {
    throw Error(ErrorCode::FitFailure, "every cross-validation cell failed");
  }
  s.argmin = best;
}

template <class T>
std::vector<T> sorted_unique(std::vector<T> v, const char* what) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, std::string("empty ") + what + " grid");
  return v;
}

std::vector<double> positive_grid(std::vector<double> v, const char* what, bool allow_zero) {
  v = sorted_unique(std::move(v), what);
  for (double t : v) {
    if (!std::isfinite(t) || t < 0.0 || (!allow_zero && t == 0.0)) {
      throw Error(ErrorCode::InvalidArgument, std::string("invalid value in ") + what + " grid");
    }
  }
  return v;
}

VectorXd nan_vector(Eigen::Index n) { return VectorXd::Constant(n, kNaN); }

/// Fills sse(offset + c) for a warm-started path of (lambda_c, mu_c) fits on
/// one decomposer.
void mu_path(const Decomposer& dec, const Fold& fold, const MatrixXd& Bte,
             const std::vector<double>& lambdas, const std::vector<double>& mus,
             const FitOptions& base, VectorXd& sse, Eigen::Index offset) {
  std::optional<std::pair<VectorXd, VectorXd>> warm;
  for (std::size_t c = 0; c < mus.size(); ++c) {
    try {
      FitOptions o = base;
      if (warm) o.solver.warm_start = warm;
      const auto fit = dec.fit(fold.y_train, mus[c], lambdas[c], o);
      sse(offset + static_cast<Eigen::Index>(c)) =
          (fold.y_test - Bte * (fit.gamma_u + fit.gamma_d)).squaredNorm();
      warm.emplace(fit.gamma_u, fit.gamma_d);
    } catch (const Error&) {
      warm.reset();
    }
  }
}

CvSurface make_surface(std::string row_axis, std::string col_axis, std::vector<double> rows,
                       std::vector<double> cols) {
  CvSurface s;
  s.row_axis = std::move(row_axis);
  s.col_axis = std::move(col_axis);
  s.row_values = std::move(rows);
  s.col_values = std::move(cols);
  s.cells.resize(s.row_values.size() * s.col_values.size());
  return s;
}

int fold_count_for(const CvGrid& grid, int n) { return grid.fold_count(n); }

/// mu scan at fixed J (MDCS) over the folds.
CvSurface mdcs_surface(std::span<const double> x, const VectorXd& y, const std::vector<int>& Js,
                       const std::vector<double>& mus, const CvGrid& grid,
                       const TuneOptions& opts) {
  const int n = static_cast<int>(x.size());
  const auto folds = make_folds(x, y, fold_count_for(grid, n), opts.seed, opts.clamp);
  std::vector<double> rows(Js.begin(), Js.end());
  CvSurface s = make_surface("J", "mu", rows, mus);
  for (std::size_t r = 0; r < Js.size(); ++r) {
    for (std::size_t c = 0; c < mus.size(); ++c) {
      auto& cell = s.cells[r * mus.size() + c];
      cell.J = Js[r];
      cell.mu = mus[c];
    }
  }
  const auto ncells = static_cast<Eigen::Index>(s.cells.size());
  const std::vector<double> zeros(mus.size(), 0.0);
  const VectorXd sse = accumulate_folds(folds, ncells, opts.threads, [&](const Fold& f) {
    VectorXd out = nan_vector(ncells);
    for (std::size_t r = 0; r < Js.size(); ++r) {
      try {
        const Decomposer dec = Decomposer::cubic(f.x_train, Js[r]);
        const MatrixXd Bte = design_matrix(dec.knots(), f.x_test);
        mu_path(dec, f, Bte, zeros, mus, opts.cv_fit, out,
                static_cast<Eigen::Index>(r * mus.size()));
      } catch (const Error&) {
        // basis not constructible on this fold: the row stays failed
      }
    }
    return out;
  });
  finalize(s, sse, n);
  return s;
}

/// (lambda, mu) cells on the smoothing-spline basis; cells are laid out
/// row-major and each row is one warm-started path.
CvSurface mdss_surface(std::span<const double> x, const VectorXd& y, CvSurface s,
                       const CvGrid& grid, const TuneOptions& opts) {
  const int n = static_cast<int>(x.size());
  const auto folds = make_folds(x, y, fold_count_for(grid, n), opts.seed, opts.clamp);
  const auto ncells = static_cast<Eigen::Index>(s.cells.size());
  const std::size_t ncols = s.cols();
  const VectorXd sse = accumulate_folds(folds, ncells, opts.threads, [&](const Fold& f) {
    VectorXd out = nan_vector(ncells);
    try {
      const Decomposer dec = Decomposer::smoothing(f.x_train);
      const MatrixXd Bte = design_matrix(dec.knots(), f.x_test);
      for (std::size_t r = 0; r < s.rows(); ++r) {
        std::vector<double> lambdas(ncols);
        std::vector<double> mus(ncols);
        for (std::size_t c = 0; c < ncols; ++c) {
          lambdas[c] = s.cells[r * ncols + c].lambda;
          mus[c] = s.cells[r * ncols + c].mu;
        }
        mu_path(dec, f, Bte, lambdas, mus, opts.cv_fit, out,
                static_cast<Eigen::Index>(r * ncols));
      }
    } catch (const Error&) {
    }
    return out;
  });
  finalize(s, sse, n);
  return s;
}

}  // namespace

std::string_view to_string(CsStrategy s) {
  return s == CsStrategy::FixJThenMu ? "FixJThenMu" : "JointJMu";
}

std::string_view to_string(SsStrategy s) {
  switch (s) {
    case SsStrategy::FixLambdaThenMu:
      return "FixLambdaThenMu";
    case SsStrategy::ShrinkageFactor:
      return "ShrinkageFactor";
    case SsStrategy::JointLambdaMu:
      return "JointLambdaMu";
  }
  return "?";
}

CvGrid CvGrid::defaults(int n) {
  CvGrid g;
  for (int i = 0; i < 10; ++i) g.mu_values.push_back(std::pow(10.0, -6.0 + 8.0 * i / 9.0));
  for (int i = 0; i < 10; ++i) g.lambda_values.push_back(std::pow(10.0, -8.0 + i));
  for (int J = 4; J <= std::min(50, n / 2); J += 2) g.J_values.push_back(J);
  if (g.J_values.empty()) g.J_values.push_back(4);
  for (int i = 1; i <= 20; ++i) g.k_values.push_back(i / 20.0);
  g.folds = n > 300 ? 10 : 0;
  return g;
}

std::string CvSurface::to_tsv() const {
  std::ostringstream os;
  os << "row_axis\trow_value\tcol_axis\tcol_value\tJ\tlambda\tmu\tcv_error\tstatus\tselected\n";
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < cols(); ++c) {
      const auto& cell = at(r, c);
      os << row_axis << '\t' << format_double(row_values[r]) << '\t' << col_axis << '\t'
         << format_double(col_values[c]) << '\t' << cell.J << '\t' << format_double(cell.lambda)
         << '\t' << format_double(cell.mu) << '\t' << format_double(cell.error) << '\t'
         << (cell.failed ? "failed" : "ok") << '\t' << (r * cols() + c == argmin ? 1 : 0)
         << '\n';
    }
  }
  return os.str();
}

std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) throw Error(ErrorCode::InvalidArgument, "folds must lie in [2, n]");
  std::vector<int> label(static_cast<std::size_t>(n));
  if (folds == n) {
    std::iota(label.begin(), label.end(), 0);
    return label;
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_engine(seed, {0x43564644ULL});
  // Fisher-Yates with a modulo draw, so the permutation does not depend on
  // the standard library's distribution implementation.
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  for (int r = 0; r < n; ++r) label[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r % folds;
  return label;
}

double cv_error(std::span<const double> x, const VectorXd& y, const FitClosure& fit, int folds,
                std::uint64_t seed, bool clamp) {
  const int n = static_cast<int>(x.size());
  const auto fs = make_folds(x, y, folds, seed, clamp);
  double sse = 0.0;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    try {
      const Predictor pred = fit(fs[f].x_train, fs[f].y_train);
      sse += (fs[f].y_test - pred(fs[f].x_test)).squaredNorm();
    } catch (const Error& e) {
      throw Error(ErrorCode::FitFailure, "fold " + std::to_string(f) + ": " + e.what());
    }
  }
  return sse / n;
}

BaselineResult tune_cubic_spline(std::span<const double> x, const VectorXd& y,
                                 const CvGrid& grid, const TuneOptions& opts) {
  const auto Js = sorted_unique(grid.J_values, "J");
  const int n = static_cast<int>(x.size());
  const auto folds = make_folds(x, y, grid.fold_count(n), opts.seed, opts.clamp);
  CvSurface s = make_surface("J", "mu", std::vector<double>(Js.begin(), Js.end()), {0.0});
  for (std::size_t r = 0; r < Js.size(); ++r) s.cells[r].J = Js[r];
  const auto ncells = static_cast<Eigen::Index>(Js.size());
  const VectorXd sse = accumulate_folds(folds, ncells, opts.threads, [&](const Fold& f) {
    VectorXd out = nan_vector(ncells);
    for (std::size_t r = 0; r < Js.size(); ++r) {
      try {
        const auto knots = build_knots(f.x_train, Js[r]);
        const VectorXd coef = solve_ls(design_matrix(knots, f.x_train), f.y_train);
        out(static_cast<Eigen::Index>(r)) =
            (f.y_test - eval_spline(knots, coef, f.x_test)).squaredNorm();
      } catch (const Error&) {
      }
    }
    return out;
  });
  finalize(s, sse, n);
  const int J = s.best().J;
  const auto knots = build_knots(x, J);
  VectorXd coef = solve_ls(design_matrix(knots, x), y);
  return {std::move(s), SplineFit{knots, std::move(coef), Method::MDCS, 0.0}};
}

BaselineResult tune_smoothing_spline(std::span<const double> x, const VectorXd& y,
                                     const CvGrid& grid, const TuneOptions& opts) {
  const auto lambdas = positive_grid(grid.lambda_values, "lambda", false);
  const int n = static_cast<int>(x.size());
  const auto folds = make_folds(x, y, grid.fold_count(n), opts.seed, opts.clamp);
  CvSurface s = make_surface("lambda", "mu", lambdas, {0.0});
  for (std::size_t r = 0; r < lambdas.size(); ++r) s.cells[r].lambda = lambdas[r];
  const auto ncells = static_cast<Eigen::Index>(lambdas.size());
  const VectorXd sse = accumulate_folds(folds, ncells, opts.threads, [&](const Fold& f) {
    VectorXd out = nan_vector(ncells);
    try {
      const Decomposer dec = Decomposer::smoothing(f.x_train);
      const MatrixXd Bte = design_matrix(dec.knots(), f.x_test);
      for (std::size_t r = 0; r < lambdas.size(); ++r) {
        try {
          out(static_cast<Eigen::Index>(r)) =
              (f.y_test - Bte * dec.baseline(f.y_train, lambdas[r])).squaredNorm();
        } catch (const Error&) {
        }
      }
    } catch (const Error&) {
    }
    return out;
  });
  finalize(s, sse, n);
  const double lambda = s.best().lambda;
  const Decomposer dec = Decomposer::smoothing(x);
  return {std::move(s), SplineFit{dec.knots(), dec.baseline(y, lambda), Method::MDSS, lambda}};
}

TuneResult tune_mdcs(std::span<const double> x, const VectorXd& y, const CvGrid& grid,
                     CsStrategy strategy, const TuneOptions& opts) {
  const auto mus = positive_grid(grid.mu_values, "mu", true);
  std::optional<CvSurface> stage1;
  std::vector<int> Js;
  if (strategy == CsStrategy::FixJThenMu) {
    auto base = tune_cubic_spline(x, y, grid, opts);
    Js = {base.surface.best().J};
    stage1 = std::move(base.surface);
  } else {
    Js = sorted_unique(grid.J_values, "J");
  }
  CvSurface s = mdcs_surface(x, y, Js, mus, grid, opts);
  const auto& best = s.best();
  DecompositionFit fit = Decomposer::cubic(x, best.J).fit(y, best.mu, 0.0, opts.final_fit);
  return {std::move(s), std::move(stage1), std::move(fit)};
}

TuneResult tune_mdss(std::span<const double> x, const VectorXd& y, const CvGrid& grid,
                     SsStrategy strategy, const TuneOptions& opts) {
  const auto mus = positive_grid(grid.mu_values, "mu", true);
  std::optional<CvSurface> stage1;
  CvSurface s;
  if (strategy == SsStrategy::JointLambdaMu) {
    const auto lambdas = positive_grid(grid.lambda_values, "lambda", false);
    s = make_surface("lambda", "mu", lambdas, mus);
    for (std::size_t r = 0; r < lambdas.size(); ++r) {
      for (std::size_t c = 0; c < mus.size(); ++c) {
        s.cells[r * mus.size() + c].lambda = lambdas[r];
        s.cells[r * mus.size() + c].mu = mus[c];
      }
    }
  } else {
    auto base = tune_smoothing_spline(x, y, grid, opts);
    const double lambda0 = base.fit.lambda;
    stage1 = std::move(base.surface);
    if (strategy == SsStrategy::FixLambdaThenMu) {
      s = make_surface("lambda", "mu", {lambda0}, mus);
      for (std::size_t c = 0; c < mus.size(); ++c) {
        s.cells[c].lambda = lambda0;
        s.cells[c].mu = mus[c];
      }
    } else {
      const auto ks = positive_grid(grid.k_values, "k", false);
      if (ks.back() > 1.0) throw Error(ErrorCode::InvalidArgument, "k must lie in (0, 1]");
      // columns run from k = 1 (mu = 0) downwards so each row is a path of
      // increasing mu
      std::vector<double> cols(ks.rbegin(), ks.rend());
      s = make_surface("lambda0", "k", {lambda0}, cols);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        s.cells[c].lambda = lambda0 / cols[c];
        s.cells[c].mu = 1.0 / cols[c] - 1.0;
      }
    }
  }
  s = mdss_surface(x, y, std::move(s), grid, opts);
  const auto& best = s.best();
  DecompositionFit fit = Decomposer::smoothing(x).fit(y, best.mu, best.lambda, opts.final_fit);
  return {std::move(s), std::move(stage1), std::move(fit)};
}

}  // namespace mdspline

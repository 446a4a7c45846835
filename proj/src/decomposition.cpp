#include "mdspline/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdspline/error.hpp"

namespace mdspline {

namespace {

double objective_of(const MatrixXd& B, const MatrixXd& Omega, const VectorXd& y, double mu,
                    double lambda, const VectorXd& u, const VectorXd& d) {
  const VectorXd s = u + d;
  double f = (y - B * s).squaredNorm();
  if (mu != 0.0) f += mu * (B * (u - d)).squaredNorm();
  if (lambda != 0.0) f += lambda * s.dot(Omega * s);
  return f;
}

bool nondecreasing(const VectorXd& v, double slack) {
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) < v(i - 1) - slack) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::MDCS ? "MDCS" : "MDSS"; }

std::string_view to_string(FitSource s) {
  return s == FitSource::Solver ? "Solver" : "ClosedForm";
}

MatrixXd TieGroups::aggregation_matrix() const {
  MatrixXd G = MatrixXd::Zero(g(), size());
  for (int k = 0; k < g(); ++k) {
    for (int j = runs[static_cast<std::size_t>(k)].first;
         j <= runs[static_cast<std::size_t>(k)].second; ++j) {
      G(k, j) = 1.0;
    }
  }
  return G;
}

TieGroups detect_ties(const VectorXd& gamma, double eps) {
  if (!(eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tie tolerance must be >= 0");
  const auto J = gamma.size();
  if (!nondecreasing(gamma, eps) && !nondecreasing(-gamma, eps)) {
    throw Error(ErrorCode::NotMonotone, "coefficients are not monotone within the tolerance");
  }
  TieGroups out;
  Eigen::Index start = 0;
  while (start < J) {
    Eigen::Index end = start;
    while (end + 1 < J && std::abs(gamma(end + 1) - gamma(start)) <= eps) ++end;
    out.runs.emplace_back(static_cast<int>(start), static_cast<int>(end));
    start = end + 1;
  }
  return out;
}

double tie_tolerance(const VectorXd& gamma_u, const VectorXd& gamma_d) {
  double scale = 0.0;
  if (gamma_u.size() > 0) scale = std::max(scale, gamma_u.cwiseAbs().maxCoeff());
  if (gamma_d.size() > 0) scale = std::max(scale, gamma_d.cwiseAbs().maxCoeff());
  return 1e-6 * scale;
}

VectorXd snap_ties(const VectorXd& gamma, const TieGroups& groups) {
  if (groups.size() != gamma.size()) {
    throw Error(ErrorCode::LengthMismatch, "tie groups do not cover the coefficient vector");
  }
  VectorXd out = gamma;
  for (const auto& [a, b] : groups.runs) {
    if (a == b) continue;
    const double m = gamma.segment(a, b - a + 1).mean();
    out.segment(a, b - a + 1).setConstant(m);
  }
  return out;
}

std::pair<VectorXd, VectorXd> closed_form_ss(const MatrixXd& B, const MatrixXd& Omega,
                                             const VectorXd& y, double lambda, double mu,
                                             const MatrixXd& G) {
  if (B.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "rows(B) must equal |y|");
  if (G.cols() != B.cols()) throw Error(ErrorCode::LengthMismatch, "G must have J columns");
  if (!(mu >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "mu and lambda must be nonnegative");
  }
  const auto n = static_cast<double>(B.rows());
  const MatrixXd BG = B * G.transpose();
  const MatrixXd GKG = BG.transpose() * BG;
  MatrixXd M = (1.0 + mu) * GKG;
  MatrixXd N = (1.0 - mu) * GKG;
  if (lambda != 0.0) {
    if (Omega.rows() != B.cols() || Omega.cols() != B.cols()) {
      throw Error(ErrorCode::LengthMismatch, "Omega must be J x J");
    }
    const MatrixXd GOG = G * Omega * G.transpose();
    M += lambda * GOG;
    N += lambda * GOG;
  }
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
    throw Error(ErrorCode::SingularSystem, "closed-form system is singular");
  }
  const VectorXd p = llt.solve(BG.transpose() * y);
  const VectorXd q = llt.solve(N * VectorXd::Ones(G.rows()));
  const double a = (BG * p).sum();
  const double b = (BG * q).sum();
  if (!(std::abs(n + b) > 1e-12 * n)) {
    throw Error(ErrorCode::SingularSystem, "offset equation is degenerate");
  }
  const double c = a / (n + b);
  VectorXd gamma_u = G.transpose() * (p - c * q);
  VectorXd gamma_d = VectorXd::Constant(B.cols(), c);
  return {std::move(gamma_u), std::move(gamma_d)};
}

std::pair<VectorXd, VectorXd> closed_form_cs(const MatrixXd& B, const VectorXd& y, double mu,
                                             const MatrixXd& G) {
  return closed_form_ss(B, MatrixXd(), y, 0.0, mu, G);
}

Decomposer Decomposer::cubic(std::span<const double> x, int J) {
  return Decomposer(Method::MDCS, build_knots(x, J), x);
}

Decomposer Decomposer::smoothing(std::span<const double> x, int max_interior) {
  Decomposer d(Method::MDSS, build_smoothing_knots(x, max_interior), x);
  d.capped_ = d.distinct_ - 2 > max_interior;
  return d;
}

Decomposer::Decomposer(Method method, KnotVector knots, std::span<const double> x)
    : method_(method),
      knots_(std::move(knots)),
      design_(make_design_pair(knots_, x)),
      gram_(design_.B, method == Method::MDSS ? design_.Omega : MatrixXd()),
      distinct_(static_cast<int>(distinct_sorted(x).size())) {}

VectorXd Decomposer::baseline(const VectorXd& y, double lambda) const {
  if (method_ == Method::MDCS && lambda != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "cubic-spline fits take no roughness penalty");
  }
  return solve_smoothing(design_.B, design_.Omega, y, lambda);
}

DecompositionFit Decomposer::fit(const VectorXd& y, double mu, double lambda,
                                 const FitOptions& opts) const {
  if (method_ == Method::MDCS && lambda != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "cubic-spline fits take no roughness penalty");
  }
  if (y.size() != n()) throw Error(ErrorCode::LengthMismatch, "|y| must equal |x|");
  if (!y.allFinite()) throw Error(ErrorCode::InvalidArgument, "y contains non-finite values");

  ConeQpGram gram = gram_;
  gram.set_response(design_.B, y);
  const ConePair sol = solve_cone_qp(gram, mu, lambda, opts.solver);

  VectorXd u = sol.gamma_u;
  VectorXd d = sol.gamma_d;
  const double eps = tie_tolerance(u, d);
  if (opts.snap_ties) {
    u = snap_ties(u, detect_ties(u, eps));
    d = snap_ties(d, detect_ties(d, eps));
  }
  const MatrixXd& B = design_.B;
  const MatrixXd& Om = design_.Omega;
  if (mu > 0.0) {
    // Moving a constant between the components keeps both feasible and the
    // sum fixed; the discrepancy term is minimized exactly when the two
    // components have equal means, so finish that direction in closed form.
    const double shift = ((B * d).mean() - (B * u).mean()) / 2.0;
    u.array() += shift;
    d.array() -= shift;
  }
  double obj = objective_of(B, Om, y, mu, lambda, u, d);
  FitSource source = FitSource::Solver;

  if (opts.refine_closed_form) {
    const TieGroups gu = detect_ties(u, eps);
    const TieGroups gd = detect_ties(d, eps);
    // Increasing fit: gamma_d flat. Decreasing fit: gamma_u flat, handled
    // through the sign flip (x, -y) -> (-gamma_d, -gamma_u).
    const bool increasing = gd.g() == 1;
    const bool decreasing = !increasing && gu.g() == 1;
    if (increasing || decreasing) {
      try {
        const MatrixXd G = (increasing ? gu : gd).aggregation_matrix();
        auto [cu, cd] = closed_form_ss(B, Om, increasing ? y : VectorXd(-y), lambda, mu, G);
        if (decreasing) {
          VectorXd tmp = -cd;
          cd = -cu;
          cu = std::move(tmp);
        }
        const double slack = 1e-12 * std::max(1.0, cu.cwiseAbs().maxCoeff());
        const double cobj = objective_of(B, Om, y, mu, lambda, cu, cd);
        if (nondecreasing(cu, slack) && nondecreasing(-cd, slack) &&
            cobj <= obj + 1e-12 * std::abs(obj)) {
          u = std::move(cu);
          d = std::move(cd);
          obj = cobj;
          source = FitSource::ClosedForm;
        }
      } catch (const Error&) {
        // keep the solver pair
      }
    }
  }

  DecompositionFit out{.knots = knots_, .gamma_u = u, .gamma_d = d};
  out.mu = mu;
  out.lambda = lambda;
  out.method = method_;
  out.source = source;
  out.fitted = B * (u + d);
  const double ceps = tie_tolerance(u, d);
  if (detect_ties(d, ceps).g() == 1) {
    out.c_offset = (B * u).sum() / static_cast<double>(n());
  } else if (detect_ties(u, ceps).g() == 1) {
    out.c_offset = (B * d).sum() / static_cast<double>(n());
  }
  out.objective = obj;
  out.iterations = sol.iterations;
  out.kkt_residual = sol.kkt_residual;
  out.converged = sol.converged;
  out.n = n();
  out.distinct_x = distinct_;
  out.knots_capped = capped_;
  return out;
}

DecompositionFit fit_mdcs(std::span<const double> x, const VectorXd& y, int J, double mu,
                          const FitOptions& opts) {
  return Decomposer::cubic(x, J).fit(y, mu, 0.0, opts);
}

DecompositionFit fit_mdss(std::span<const double> x, const VectorXd& y, double lambda,
                          double mu, const FitOptions& opts) {
  return Decomposer::smoothing(x).fit(y, mu, lambda, opts);
}

Prediction predict(const DecompositionFit& fit, std::span<const double> t) {
  Prediction p;
  const MatrixXd Bt = design_matrix(fit.knots, t);
  p.f_up = Bt * fit.gamma_u;
  p.f_down = Bt * fit.gamma_d;
  p.f = p.f_up + p.f_down;
  return p;
}

namespace {

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const DecompositionFit& fit) {
  nlohmann::json j;
  j["method"] = to_string(fit.method);
  j["source"] = to_string(fit.source);
  j["mu"] = fit.mu;
  j["lambda"] = fit.lambda;
  j["basis_size"] = fit.basis_size();
  j["knots"] = {{"lo", fit.knots.lo()}, {"hi", fit.knots.hi()},
                {"interior", fit.knots.interior()}};
  j["gamma_u"] = to_vec(fit.gamma_u);
  j["gamma_d"] = to_vec(fit.gamma_d);
  j["c_offset"] = fit.c_offset ? nlohmann::json(*fit.c_offset) : nlohmann::json(nullptr);
  j["fitted"] = to_vec(fit.fitted);
  j["diagnostics"] = {{"objective", fit.objective},
                      {"iterations", fit.iterations},
                      {"kkt_residual", fit.kkt_residual},
                      {"converged", fit.converged},
                      {"n", fit.n},
                      {"distinct_x", fit.distinct_x},
                      {"knots_capped", fit.knots_capped}};
  return j;
}

DecompositionFit fit_from_json(const nlohmann::json& j) {
  try {
    const auto& k = j.at("knots");
    DecompositionFit fit{
        .knots = KnotVector(k.at("lo").get<double>(), k.at("hi").get<double>(),
                            k.at("interior").get<std::vector<double>>()),
        .gamma_u = from_vec(j.at("gamma_u").get<std::vector<double>>()),
        .gamma_d = from_vec(j.at("gamma_d").get<std::vector<double>>())};
    const auto method = j.at("method").get<std::string>();
    if (method != "MDCS" && method != "MDSS") {
      throw Error(ErrorCode::ParseError, "unknown method '" + method + "'");
    }
    fit.method = method == "MDCS" ? Method::MDCS : Method::MDSS;
    fit.source = j.at("source").get<std::string>() == "ClosedForm" ? FitSource::ClosedForm
                                                                   : FitSource::Solver;
    fit.mu = j.at("mu").get<double>();
    fit.lambda = j.at("lambda").get<double>();
    fit.fitted = from_vec(j.at("fitted").get<std::vector<double>>());
    if (!j.at("c_offset").is_null()) fit.c_offset = j.at("c_offset").get<double>();
    const auto& dg = j.at("diagnostics");
    fit.objective = dg.at("objective").get<double>();
    fit.iterations = dg.at("iterations").get<int>();
    fit.kkt_residual = dg.at("kkt_residual").get<double>();
    fit.converged = dg.at("converged").get<bool>();
    fit.n = dg.at("n").get<int>();
    fit.distinct_x = dg.at("distinct_x").get<int>();
    fit.knots_capped = dg.at("knots_capped").get<bool>();
    if (fit.gamma_u.size() != fit.knots.size() || fit.gamma_d.size() != fit.knots.size()) {
      throw Error(ErrorCode::ParseError, "coefficient length does not match the knots");
    }
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed fit document: ") + e.what());
  }
}

}  // namespace mdspline

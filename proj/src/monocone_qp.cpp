#include "mdspline/monocone_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mdspline/error.hpp"

namespace mdspline {

namespace {

int band_of(const MatrixXd& A, int start = 0) {
  int w = start;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      if (A(i, j) != 0.0) w = std::max(w, static_cast<int>(std::abs(i - j)));
    }
  }
  return w;
}

// y += A x restricted to |i - j| <= w
void band_matvec_add(const MatrixXd& A, int w, const VectorXd& x, double scale, VectorXd& y) {
  const auto J = static_cast<int>(A.rows());
  for (int i = 0; i < J; ++i) {
    const int lo = std::max(0, i - w);
    const int hi = std::min(J - 1, i + w);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += A(i, j) * x(j);
    y(i) += scale * acc;
  }
}

// L' Omega L, where L maps increments to coefficients by cumulative sums.
// A roughness penalty annihilates constants, and then this matrix is banded
// with the bandwidth of Omega: the entries outside the band are sums of whole
// rows or columns and vanish exactly. Forming them from the (huge) entries of
// Omega instead would leave rounding noise of the size of Omega itself.
MatrixXd increment_penalty(const MatrixXd& Om, int w, int& band) {
  const auto J = static_cast<int>(Om.rows());
  bool annihilates = true;
  for (int i = 0; i < J && annihilates; ++i) {
    annihilates = std::abs(Om.row(i).sum()) <= 1e-10 * Om.row(i).cwiseAbs().sum();
  }
  if (!annihilates) {
    // suffix sums over rows, then over columns
    MatrixXd Q = Om;
    for (int i = J - 2; i >= 0; --i) Q.row(i) += Q.row(i + 1);
    for (int j = J - 2; j >= 0; --j) Q.col(j) += Q.col(j + 1);
    band = J - 1;
    return Q;
  }
  MatrixXd Q = MatrixXd::Zero(J, J);
  // R(i, l) = sum_{j >= l} Omega(i, j): zero unless i - w < l <= i + w.
  MatrixXd R = MatrixXd::Zero(J, J);
  for (int i = 0; i < J; ++i) {
    double acc = 0.0;
    for (int l = std::min(J - 1, i + w); l > std::max(0, i - w); --l) {
      acc += Om(i, l);
      R(i, l) = acc;
    }
  }
  // Q(k, l) = sum_{i >= k} R(i, l): zero unless l - w < k < l + w.
  for (int l = 1; l < J; ++l) {
    double acc = 0.0;
    for (int k = std::min(J - 1, l + w - 1); k > std::max(0, l - w); --k) {
      acc += R(k, l);
      Q(k, l) = acc;
    }
  }
  Q = (0.5 * (Q + Q.transpose())).eval();
  band = w;
  return Q;
}

}  // namespace

void ConeQpProblem::validate() const {
  if (!(mu >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "mu and lambda must be nonnegative");
  }
  if (B.rows() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "rows(B) must equal |y|");
  }
  if (Omega.size() != 0 && (Omega.rows() != B.cols() || Omega.cols() != B.cols())) {
    throw Error(ErrorCode::LengthMismatch, "Omega must be J x J");
  }
  if (B.cols() < 1) throw Error(ErrorCode::InvalidArgument, "empty basis");
}

ConeQpGram::ConeQpGram(const MatrixXd& B, const MatrixXd& Omega) {
  const auto J = B.cols();
  K_ = MatrixXd::Zero(J, J);
  K_.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
  K_ = K_.selfadjointView<Eigen::Lower>();
  Omega_ = Omega.size() == 0 ? MatrixXd::Zero(J, J) : Omega;
  band_ = band_of(Omega_, band_of(K_));
  OmegaZ_ = increment_penalty(Omega_, band_of(Omega_), bandZ_);
  Bty_ = VectorXd::Zero(J);
}

void ConeQpGram::set_response(const MatrixXd& B, const VectorXd& y) {
  if (B.rows() != y.size() || B.cols() != K_.rows()) {
    throw Error(ErrorCode::LengthMismatch, "response does not match the design");
  }
  Bty_ = B.transpose() * y;
  yty_ = y.squaredNorm();
}

VectorXd solve_ls(const MatrixXd& B, const VectorXd& y) {
  if (B.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "rows(B) must equal |y|");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(B);
  qr.setThreshold(1e-12);
  if (B.rows() < B.cols() || qr.rank() < B.cols()) {
    throw Error(ErrorCode::SingularDesign, "design matrix is column-rank deficient");
  }
  return qr.solve(y);
}

VectorXd solve_smoothing(const MatrixXd& B, const MatrixXd& Omega, const VectorXd& y,
                         double lambda) {
  if (B.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "rows(B) must equal |y|");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");
  if (lambda == 0.0) {
    try {
      return solve_ls(B, y);
    } catch (const Error&) {
      throw Error(ErrorCode::SingularSystem, "B'B is singular and lambda = 0");
    }
  }
  MatrixXd A = B.transpose() * B + lambda * Omega;
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-10) return llt.solve(B.transpose() * y);

  // Ill-conditioned normal equations: solve the stacked least-squares
  // problem [B; sqrt(lambda) R] with Omega = R'R instead.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Omega);
  // eigenvalues at roundoff level belong to the null space (linear functions)
  const double cut = 1e-10 * std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  const VectorXd root =
      eig.eigenvalues().unaryExpr([cut](double v) { return v > cut ? std::sqrt(v) : 0.0; });
  const auto J = B.cols();
  MatrixXd stacked(B.rows() + J, J);
  stacked.topRows(B.rows()) = B;
  stacked.bottomRows(J) = std::sqrt(lambda) * root.asDiagonal() * eig.eigenvectors().transpose();
  VectorXd rhs = VectorXd::Zero(B.rows() + J);
  rhs.head(B.rows()) = y;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(stacked);
  qr.setThreshold(1e-13);
  if (qr.rank() < J) throw Error(ErrorCode::SingularSystem, "B'B + lambda Omega is singular");
  return qr.solve(rhs);
}

std::pair<VectorXd, VectorXd> sequence_decompose(const VectorXd& gamma) {
  const auto J = gamma.size();
  VectorXd up(J);
  VectorXd down(J);
  if (J == 0) return {up, down};
  up(0) = gamma(0);
  down(0) = 0.0;
  for (Eigen::Index i = 1; i < J; ++i) {
    const double diff = gamma(i) - gamma(i - 1);
    up(i) = up(i - 1) + std::max(diff, 0.0);
    down(i) = down(i - 1) + std::min(diff, 0.0);
  }
  return {up, down};
}

double cone_objective(const ConeQpProblem& prob, const VectorXd& gamma_u,
                      const VectorXd& gamma_d) {
  const VectorXd s = gamma_u + gamma_d;
  double f = (prob.y - prob.B * s).squaredNorm();
  if (prob.mu != 0.0) f += prob.mu * (prob.B * (gamma_u - gamma_d)).squaredNorm();
  if (prob.lambda != 0.0 && prob.Omega.size() != 0) f += prob.lambda * s.dot(prob.Omega * s);
  return f;
}

namespace {

// Active-set solver in difference coordinates
//   z = (a, du_1..du_{J-1}, b, dd_1..dd_{J-1}),
//   gu_j = a + sum_{k<=j} du_k,  gd_j = b - sum_{k<=j} dd_k,
// so the cone becomes du, dd >= 0 with a, b free. A working set of
// increments pinned at zero is equivalent to tie groups in gu/gd; the
// equality-constrained subproblem is solved in group coordinates where
// the reduced Hessian inherits the band structure of B'B and Omega.
class ConeSolver {
 public:
  ConeSolver(const ConeQpGram& gram, double mu, double lambda)
      : g_(gram), mu_(mu), lambda_(lambda), J_(gram.basis_size()) {}

  ConePair run(const VectorXd& warm_u, const VectorXd& warm_d, const ConeQpOptions& opts);

 private:
  void gamma_from_z();
  void compute_gradient();
  double objective() const;
  void build_groups();
  bool solve_face_step(VectorXd& du_step, VectorXd& dd_step);
  bool is_bounded(int i) const { return i != 0 && i != J_; }

  const ConeQpGram& g_;
  double mu_;
  double lambda_;
  int J_;

  VectorXd z_;
  std::vector<char> fixed_;
  VectorXd u_, d_;
  VectorXd grad_u_, grad_d_;  // half-gradient w.r.t. gu, gd
  VectorXd grad_z_;
  double objective_ = 0.0;
  std::vector<int> gu_, gd_;
  int n_gu_ = 0, n_gd_ = 0;
};

void ConeSolver::gamma_from_z() {
  u_.resize(J_);
  d_.resize(J_);
  u_(0) = z_(0);
  d_(0) = z_(J_);
  for (int j = 1; j < J_; ++j) {
    u_(j) = u_(j - 1) + z_(j);
    d_(j) = d_(j - 1) - z_(J_ + j);
  }
}

// The gradient is accumulated in increment coordinates, where the penalty
// part is L' Omega L applied to the increments of gu + gd. Those increments
// are small, so this avoids the cancellation in Omega (gu + gd) when close
// knots make Omega huge. The coefficient-space gradients are recovered as
// differences of the suffix sums.
void ConeSolver::compute_gradient() {
  const int w = g_.bandwidth();
  const VectorXd s = u_ + d_;
  VectorXd base = -g_.Bty();  // K s - B'y
  band_matvec_add(g_.gram(), w, s, 1.0, base);
  VectorXd Kt = VectorXd::Zero(J_);
  if (mu_ != 0.0) band_matvec_add(g_.gram(), w, u_ - d_, mu_, Kt);
  VectorXd pen = VectorXd::Zero(J_);
  double pen_value = 0.0;
  if (lambda_ != 0.0) {
    VectorXd inc(J_);
    inc(0) = s(0);
    for (int j = 1; j < J_; ++j) inc(j) = z_(j) - z_(J_ + j);
    band_matvec_add(g_.omega_increments(), g_.omega_increments_bandwidth(), inc, lambda_, pen);
    pen_value = inc.dot(pen);
  }

  grad_z_.resize(2 * J_);
  grad_u_.resize(J_);
  grad_d_.resize(J_);
  double su = 0.0;
  double sd = 0.0;
  double su_next = 0.0;
  double sd_next = 0.0;
  for (int j = J_ - 1; j >= 0; --j) {
    su += base(j) + Kt(j);
    sd += base(j) - Kt(j);
    const double gu = su + pen(j);
    const double gd = sd + pen(j);
    grad_z_(j) = gu;
    grad_z_(J_ + j) = j == 0 ? gd : -gd;
    grad_u_(j) = gu - su_next;
    grad_d_(j) = gd - sd_next;
    su_next = gu;
    sd_next = gd;
  }
  objective_ = s.dot(base) - g_.Bty().dot(s) + g_.yty() + (u_ - d_).dot(Kt) + pen_value;
}

double ConeSolver::objective() const { return objective_; }

void ConeSolver::build_groups() {
  gu_.assign(static_cast<std::size_t>(J_), 0);
  gd_.assign(static_cast<std::size_t>(J_), 0);
  n_gu_ = 1;
  n_gd_ = 1;
  for (int j = 1; j < J_; ++j) {
    if (!fixed_[static_cast<std::size_t>(j)]) ++n_gu_;
    gu_[static_cast<std::size_t>(j)] = n_gu_ - 1;
    if (!fixed_[static_cast<std::size_t>(J_ + j)]) ++n_gd_;
    gd_[static_cast<std::size_t>(j)] = n_gd_ - 1;
  }
}

// Newton step on the current face, computed in group coordinates. A tiny
// ridge keeps the factorization defined when the face Hessian is singular;
// the ridge-damped step is still a descent direction. The ridge must stay
// well below the weakest genuine curvature, mu K along gu - gd, which can be
// many orders of magnitude below the lambda Omega entries.
bool ConeSolver::solve_face_step(VectorXd& du_step, VectorXd& dd_step) {
  build_groups();
  const int dim = n_gu_ + n_gd_;
  const int w = g_.bandwidth();
  const MatrixXd& K = g_.gram();

  VectorXd rhs = VectorXd::Zero(dim);
  for (int j = 0; j < J_; ++j) {
    rhs(gu_[static_cast<std::size_t>(j)]) -= grad_u_(j);
    rhs(n_gu_ + gd_[static_cast<std::size_t>(j)]) -= grad_d_(j);
  }

  // Ridges to try, smallest first, in steps of 100. The smallest keeps the
  // weak mu K curvature intact but can be below what double precision
  // resolves next to large lambda Omega entries, so a step is only accepted
  // if it is a descent direction that actually solves the unridged system;
  // the largest only needs to give descent.
  auto face_ridges = [&](double maxdiag) {
    const double base = 1e-13 * std::max(maxdiag, 1e-300);
    double r = base;
    if (mu_ > 0.0) r = std::min(r, 1e-13 * mu_ * std::max(K.diagonal().maxCoeff(), 1e-300));
    std::vector<double> ridges;
    for (; r < 1e3 * base; r *= 100.0) ridges.push_back(r);
    ridges.push_back(1e3 * base);
    return ridges;
  };

  auto acceptable = [&](const VectorXd& p, const VectorXd& Mp, bool last) {
    if (!p.allFinite() || !(rhs.dot(p) > 0.0)) return false;
    return last || (rhs - Mp).norm() <= 0.5 * rhs.norm();
  };

  // Face Hessian (half) in group coordinates. The K part is summed entry by
  // entry. The lambda Omega part of a block of groups is a rectangle sum of
  // Omega, taken by inclusion-exclusion from the increment penalty so that it
  // carries no more rounding than the gradient does.
  auto assemble = [&](auto&& add) {
    for (int i = 0; i < J_; ++i) {
      const int lo = std::max(0, i - w);
      const int hi = std::min(J_ - 1, i + w);
      const int ui = gu_[static_cast<std::size_t>(i)];
      const int di = n_gu_ + gd_[static_cast<std::size_t>(i)];
      for (int j = lo; j <= hi; ++j) {
        const double k = K(i, j);
        if (k == 0.0) continue;
        const int uj = gu_[static_cast<std::size_t>(j)];
        const int dj = n_gu_ + gd_[static_cast<std::size_t>(j)];
        add(ui, uj, (1.0 + mu_) * k);
        add(di, dj, (1.0 + mu_) * k);
        add(ui, dj, (1.0 - mu_) * k);
        add(di, uj, (1.0 - mu_) * k);
      }
    }
    if (lambda_ == 0.0) return;
    const MatrixXd& Q = g_.omega_increments();
    const int wq = g_.omega_increments_bandwidth();
    auto q = [&](int k, int l) { return k >= J_ || l >= J_ ? 0.0 : Q(k, l); };
    // group g of a family spans [start[g], start[g + 1])
    auto starts = [&](const std::vector<int>& grp, int n) {
      std::vector<int> st(static_cast<std::size_t>(n) + 1, J_);
      for (int j = J_ - 1; j >= 0; --j) st[static_cast<std::size_t>(grp[static_cast<std::size_t>(j)])] = j;
      return st;
    };
    const auto su = starts(gu_, n_gu_);
    const auto sd = starts(gd_, n_gd_);
    auto pairs = [&](const std::vector<int>& sx, int nx, int ox, const std::vector<int>& sy, int ny, int oy) {
      int first = 0;
      for (int g = 0; g < nx; ++g) {
        const int a1 = sx[static_cast<std::size_t>(g)];
        const int a2 = sx[static_cast<std::size_t>(g) + 1];
        while (first < ny && sy[static_cast<std::size_t>(first) + 1] + wq <= a1) ++first;
        for (int h = first; h < ny; ++h) {
          const int b1 = sy[static_cast<std::size_t>(h)];
          if (b1 >= a2 + wq) break;
          const int b2 = sy[static_cast<std::size_t>(h) + 1];
          const double v = q(a1, b1) - q(a2, b1) - q(a1, b2) + q(a2, b2);
          if (v != 0.0) add(ox + g, oy + h, lambda_ * v);
        }
      }
    };
    pairs(su, n_gu_, 0, su, n_gu_, 0);
    pairs(sd, n_gd_, n_gu_, sd, n_gd_, n_gu_);
    pairs(su, n_gu_, 0, sd, n_gd_, n_gu_);
    pairs(sd, n_gd_, n_gu_, su, n_gu_, 0);
  };

  VectorXd step;
  const bool dense = dim <= 48 || w * 4 >= J_;
  if (rhs.isZero(0.0)) {
    step = VectorXd::Zero(dim);
  } else if (dense) {
    MatrixXd M = MatrixXd::Zero(dim, dim);
    assemble([&](int r, int c, double v) { M(r, c) += v; });
    const auto ridges = face_ridges(M.diagonal().maxCoeff());
    for (std::size_t k = 0; k < ridges.size(); ++k) {
      MatrixXd Mr = M;
      Mr.diagonal().array() += ridges[k];
      Eigen::LDLT<MatrixXd> ldlt(Mr);
      if (ldlt.info() != Eigen::Success) continue;
      VectorXd p = ldlt.solve(rhs);
      if (acceptable(p, M * p, k + 1 == ridges.size())) {
        step = std::move(p);
        break;
      }
    }
  } else {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(J_) * static_cast<std::size_t>(2 * w + 1) * 8 + dim);
    assemble([&](int r, int c, double v) { trip.emplace_back(r, c, v); });
    for (int i = 0; i < dim; ++i) trip.emplace_back(i, i, 0.0);
    Eigen::SparseMatrix<double> M(dim, dim);
    M.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.analyzePattern(M);
    const auto ridges = face_ridges(M.diagonal().cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < ridges.size(); ++k) {
      ldlt.setShift(ridges[k]);
      ldlt.factorize(M);
      if (ldlt.info() != Eigen::Success) continue;
      VectorXd p = ldlt.solve(rhs);
      if (ldlt.info() == Eigen::Success && acceptable(p, M * p, k + 1 == ridges.size())) {
        step = std::move(p);
        break;
      }
    }
  }
  if (step.size() != dim) return false;
  if (!step.allFinite()) return false;

  du_step.resize(J_);
  dd_step.resize(J_);
  for (int j = 0; j < J_; ++j) {
    du_step(j) = step(gu_[static_cast<std::size_t>(j)]);
    dd_step(j) = step(n_gu_ + gd_[static_cast<std::size_t>(j)]);
  }
  return true;
}

ConePair ConeSolver::run(const VectorXd& warm_u, const VectorXd& warm_d,
                         const ConeQpOptions& opts) {
  z_.resize(2 * J_);
  fixed_.assign(static_cast<std::size_t>(2 * J_), 0);
  z_(0) = warm_u(0);
  z_(J_) = warm_d(0);
  for (int j = 1; j < J_; ++j) {
    z_(j) = std::max(0.0, warm_u(j) - warm_u(j - 1));
    z_(J_ + j) = std::max(0.0, warm_d(j - 1) - warm_d(j));
    fixed_[static_cast<std::size_t>(j)] = z_(j) == 0.0;
    fixed_[static_cast<std::size_t>(J_ + j)] = z_(J_ + j) == 0.0;
  }

  const double tol = opts.kkt_tol * (1.0 + g_.Bty().norm());
  ConePair out;
  gamma_from_z();
  compute_gradient();
  out.objective_history.push_back(objective());

  auto kkt_residual = [&]() {
    double r = 0.0;
    for (int i = 0; i < 2 * J_; ++i) {
      const double gi = grad_z_(i);
      if (fixed_[static_cast<std::size_t>(i)]) {
        r = std::max(r, -gi);
      } else {
        r = std::max(r, std::abs(gi));
      }
    }
    return r;
  };
  auto face_residual = [&]() {
    double r = 0.0;
    for (int i = 0; i < 2 * J_; ++i) {
      if (!fixed_[static_cast<std::size_t>(i)]) r = std::max(r, std::abs(grad_z_(i)));
    }
    return r;
  };

  bool single_release = false;
  // A full Newton step that hits no bound lands on the face minimizer; any
  // remaining face residual is rounding in the cumulative gradient sums
  // (which scale with lambda * |Omega|), so another step cannot reduce it.
  bool face_solved = false;
  int stalled = 0;
  int iter = 0;
  VectorXd du_step, dd_step;
  VectorXd dz(2 * J_);
  while (iter < opts.max_iterations) {
    if (face_solved || face_residual() <= 0.1 * tol) {
      face_solved = false;
      // Face optimal: inspect the multipliers of pinned increments.
      int worst = -1;
      double worst_val = -tol;
      std::vector<int> negatives;
      for (int i = 0; i < 2 * J_; ++i) {
        if (!fixed_[static_cast<std::size_t>(i)]) continue;
        if (grad_z_(i) < -tol) negatives.push_back(i);
        if (grad_z_(i) < worst_val) {
          worst_val = grad_z_(i);
          worst = i;
        }
      }
      if (worst < 0) {
        out.converged = true;
        break;
      }
      if (single_release) {
        fixed_[static_cast<std::size_t>(worst)] = 0;
      } else {
        for (int i : negatives) fixed_[static_cast<std::size_t>(i)] = 0;
      }
    }

    ++iter;
    if (!solve_face_step(du_step, dd_step)) {
      throw Error(ErrorCode::SingularDesign, "face subproblem could not be factorized");
    }
    dz(0) = du_step(0);
    dz(J_) = dd_step(0);
    for (int j = 1; j < J_; ++j) {
      dz(j) = fixed_[static_cast<std::size_t>(j)] ? 0.0 : du_step(j) - du_step(j - 1);
      dz(J_ + j) = fixed_[static_cast<std::size_t>(J_ + j)] ? 0.0 : dd_step(j - 1) - dd_step(j);
    }

    double alpha = 1.0;
    for (int i = 0; i < 2 * J_; ++i) {
      if (!is_bounded(i) || fixed_[static_cast<std::size_t>(i)] || dz(i) >= 0.0) continue;
      alpha = std::min(alpha, z_(i) / -dz(i));
    }
    alpha = std::max(alpha, 0.0);
    for (int i = 0; i < 2 * J_; ++i) {
      if (fixed_[static_cast<std::size_t>(i)]) continue;
      const bool blocking = alpha < 1.0 && is_bounded(i) && dz(i) < 0.0 &&
                            z_(i) / -dz(i) <= alpha * (1.0 + 1e-12);
      z_(i) += alpha * dz(i);
      if (is_bounded(i) && (blocking || z_(i) <= 0.0)) {
        z_(i) = 0.0;
        fixed_[static_cast<std::size_t>(i)] = 1;
      }
    }

    gamma_from_z();
    compute_gradient();
    out.objective_history.push_back(objective());

    face_solved = alpha == 1.0;
    if (alpha == 0.0) {
      ++stalled;
      single_release = true;
    } else {
      stalled = 0;
      single_release = false;
    }
    if (stalled > 4 * J_ + 10) break;
  }

  out.iterations = iter;
  out.kkt_residual = kkt_residual();
  if (!out.converged && out.kkt_residual <= tol) out.converged = true;
  out.gamma_u = u_;
  out.gamma_d = d_;
  out.objective = out.objective_history.back();
  return out;
}

std::pair<VectorXd, VectorXd> default_warm_start(const ConeQpGram& gram, double lambda) {
  MatrixXd A = gram.gram();
  if (lambda > 0.0) A += lambda * gram.omega();
  Eigen::LDLT<MatrixXd> ldlt(A);
  VectorXd coef;
  const double scale = std::max(A.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      ldlt.vectorD().minCoeff() > 1e-12 * scale) {
    coef = ldlt.solve(gram.Bty());
  } else {
    coef = A.completeOrthogonalDecomposition().solve(gram.Bty());
  }
  return sequence_decompose(coef);
}

}  // namespace

ConePair solve_cone_qp(const ConeQpGram& gram, double mu, double lambda,
                       const ConeQpOptions& opts) {
  if (!(mu >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "mu and lambda must be nonnegative");
  }
  const int J = gram.basis_size();
  std::pair<VectorXd, VectorXd> warm;
  if (opts.warm_start) {
    warm = *opts.warm_start;
    if (warm.first.size() != J || warm.second.size() != J) {
      throw Error(ErrorCode::LengthMismatch, "warm start has the wrong length");
    }
  } else {
    warm = default_warm_start(gram, lambda);
  }
  ConeSolver solver(gram, mu, lambda);
  return solver.run(warm.first, warm.second, opts);
}

ConePair solve_cone_qp(const ConeQpProblem& prob, const ConeQpOptions& opts) {
  prob.validate();
  ConeQpGram gram(prob.B, prob.Omega);
  gram.set_response(prob.B, prob.y);
  ConePair out = solve_cone_qp(gram, prob.mu, prob.lambda, opts);
  out.objective = cone_objective(prob, out.gamma_u, out.gamma_d);
  return out;
}

}  // namespace mdspline

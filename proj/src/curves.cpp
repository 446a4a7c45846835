#include "mdspline/curves.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <vector>

#include "mdspline/error.hpp"
#include "mdspline/format.hpp"
#include "mdspline/rng.hpp"

namespace mdspline {

namespace {

std::vector<std::string_view> split_dash(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('-', start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(std::string_view s, std::string_view label) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::UnknownLabel, "bad number '" + std::string(s) + "' in label '" +
                                             std::string(label) + "'");
  }
  return v;
}

}  // namespace

void KernelSpec::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(ell)) throw Error(ErrorCode::InvalidArgument, "kernel length scale must be > 0");
  switch (family) {
    case KernelFamily::SE:
      break;
    case KernelFamily::RQ:
      if (!positive(alpha)) throw Error(ErrorCode::InvalidArgument, "RQ alpha must be > 0");
      break;
    case KernelFamily::Matern:
      if (nu != 0.5 && nu != 1.5 && nu != 2.5) {
        throw Error(ErrorCode::UnsupportedNu, "Matern nu must be 1/2, 3/2 or 5/2");
      }
      break;
    case KernelFamily::Periodic:
      if (!positive(T)) throw Error(ErrorCode::InvalidArgument, "periodic T must be > 0");
      break;
  }
}

double KernelSpec::operator()(double r) const {
  r = std::abs(r);
  switch (family) {
    case KernelFamily::SE:
      return std::exp(-r * r / (2.0 * ell * ell));
    case KernelFamily::RQ:
      return std::pow(1.0 + r * r / (2.0 * alpha * ell * ell), -alpha);
    case KernelFamily::Matern: {
      const double s = std::sqrt(2.0 * nu) * r / ell;
      if (nu == 0.5) return std::exp(-s);
      if (nu == 1.5) return (1.0 + s) * std::exp(-s);
      if (nu == 2.5) return (1.0 + s + s * s / 3.0) * std::exp(-s);
      throw Error(ErrorCode::UnsupportedNu, "Matern nu must be 1/2, 3/2 or 5/2");
    }
    case KernelFamily::Periodic: {
      const double sn = std::sin(r / T);
      return std::exp(-2.0 * sn * sn / (ell * ell));
    }
  }
  return 0.0;
}

std::string KernelSpec::label() const {
  switch (family) {
    case KernelFamily::SE:
      return "SE-" + format_double(ell);
    case KernelFamily::RQ:
      return "RQ-" + format_double(ell) + "-" + format_double(alpha);
    case KernelFamily::Matern: {
      const char* tag = nu == 0.5 ? "Mat12" : nu == 1.5 ? "Mat32" : "Mat52";
      return std::string(tag) + "-" + format_double(ell);
    }
    case KernelFamily::Periodic:
      return "Periodic-" + format_double(ell) + "-" + format_double(T);
  }
  return {};
}

KernelSpec KernelSpec::parse(std::string_view label) {
  const auto parts = split_dash(label);
  const std::string_view head = parts.front();
  KernelSpec k;
  std::size_t expected = 2;
  if (head == "SE") {
    k.family = KernelFamily::SE;
  } else if (head == "RQ") {
    k.family = KernelFamily::RQ;
    expected = 3;
  } else if (head == "Mat12" || head == "Mat32" || head == "Mat52") {
    k.family = KernelFamily::Matern;
    k.nu = head == "Mat12" ? 0.5 : head == "Mat32" ? 1.5 : 2.5;
  } else if (head.starts_with("Mat")) {
    throw Error(ErrorCode::UnsupportedNu, "unsupported Matern kernel '" + std::string(label) + "'");
  } else if (head == "Periodic") {
    k.family = KernelFamily::Periodic;
    expected = 3;
  } else {
    throw Error(ErrorCode::UnknownLabel, "unknown kernel label '" + std::string(label) + "'");
  }
  if (parts.size() != expected) {
    throw Error(ErrorCode::UnknownLabel,
                "kernel label '" + std::string(label) + "' has the wrong number of parameters");
  }
  k.ell = parse_number(parts[1], label);
  if (k.family == KernelFamily::RQ) k.alpha = parse_number(parts[2], label);
  if (k.family == KernelFamily::Periodic) k.T = parse_number(parts[2], label);
  k.validate();
  return k;
}

void NamedCurve::validate() const {
  if (kind == CurveKind::GhosalM && (index < 1 || index > 4)) {
    throw Error(ErrorCode::InvalidArgument, "Ghosal curve index must be 1..4");
  }
  if (kind == CurveKind::BowmanA && !std::isfinite(a)) {
    throw Error(ErrorCode::InvalidArgument, "Bowman parameter must be finite");
  }
}

std::string NamedCurve::label() const {
  switch (kind) {
    case CurveKind::X:
      return "x";
    case CurveKind::X2:
      return "x2";
    case CurveKind::X3:
      return "x3";
    case CurveKind::Cbrt:
      return "cbrt";
    case CurveKind::Exp:
      return "exp";
    case CurveKind::Sigmoid5:
      return "sigmoid";
    case CurveKind::SigmoidStd:
      return "sigmoid-std";
    case CurveKind::BowmanA:
      return "bowman-" + format_double(a);
    case CurveKind::GhosalM:
      return "ghosal-m" + std::to_string(index);
  }
  return {};
}

std::pair<double, double> NamedCurve::domain() const {
  if (kind == CurveKind::BowmanA || kind == CurveKind::GhosalM) return {0.0, 1.0};
  return {-1.0, 1.0};
}

bool NamedCurve::is_monotone() const {
  switch (kind) {
    case CurveKind::X2:
      return false;
    case CurveKind::BowmanA:
      // 1 + x - a exp(-(x-.5)^2 / .02) has slope >= 0 iff a <= 0.1 sqrt(e)
      return a <= 0.1 * std::sqrt(std::exp(1.0));
    case CurveKind::GhosalM:
      return index == 1;
    default:
      return true;
  }
}

NamedCurve NamedCurve::parse(std::string_view label) {
  NamedCurve c;
  if (label == "x") {
    c.kind = CurveKind::X;
  } else if (label == "x2") {
    c.kind = CurveKind::X2;
  } else if (label == "x3") {
    c.kind = CurveKind::X3;
  } else if (label == "cbrt") {
    c.kind = CurveKind::Cbrt;
  } else if (label == "exp") {
    c.kind = CurveKind::Exp;
  } else if (label == "sigmoid") {
    c.kind = CurveKind::Sigmoid5;
  } else if (label == "sigmoid-std") {
    c.kind = CurveKind::SigmoidStd;
  } else if (label.starts_with("bowman-")) {
    c.kind = CurveKind::BowmanA;
    c.a = parse_number(label.substr(7), label);
  } else if (label.starts_with("ghosal-m") && label.size() == 9 && label[8] >= '1' &&
             label[8] <= '4') {
    c.kind = CurveKind::GhosalM;
    c.index = label[8] - '0';
  } else {
    throw Error(ErrorCode::UnknownLabel, "unknown curve label '" + std::string(label) + "'");
  }
  c.validate();
  return c;
}

VectorXd eval_curve(const NamedCurve& curve, std::span<const double> x) {
  curve.validate();
  const auto [lo, hi] = curve.domain();
  VectorXd out(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (!(v >= lo && v <= hi)) {
      throw Error(ErrorCode::DomainError, "x = " + format_double(v) + " outside the domain of '" +
                                              curve.label() + "'");
    }
    double f = 0.0;
    switch (curve.kind) {
      case CurveKind::X:
        f = v;
        break;
      case CurveKind::X2:
        f = v * v;
        break;
      case CurveKind::X3:
        f = v * v * v;
        break;
      case CurveKind::Cbrt:
        f = std::cbrt(v);
        break;
      case CurveKind::Exp:
        f = std::exp(v);
        break;
      case CurveKind::Sigmoid5:
        f = 1.0 / (1.0 + std::exp(-5.0 * v));
        break;
      case CurveKind::SigmoidStd:
        f = 1.0 / (1.0 + std::exp(-v));
        break;
      case CurveKind::BowmanA:
        f = 1.0 + v - curve.a * std::exp(-(v - 0.5) * (v - 0.5) / (2.0 * 0.1 * 0.1));
        break;
      case CurveKind::GhosalM:
        switch (curve.index) {
          case 1:
            f = 0.0;
            break;
          case 2:
            f = v * (1.0 - v);
            break;
          case 3:
            f = v + 0.415 * std::exp(-50.0 * v * v);
            break;
          default: {
            const double bump = std::exp(-100.0 * (v - 0.25) * (v - 0.25));
            f = v < 0.5 ? 10.0 * std::pow(v - 0.5, 3) - bump : 0.1 * (v - 0.5) - bump;
          }
        }
        break;
    }
    out(static_cast<Eigen::Index>(i)) = f;
  }
  return out;
}

MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const double> x) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(x.size());
  MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = spec(0.0);
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = K(j, i) = spec(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
    }
  }
  return K;
}

VectorXd gp_sample(const KernelSpec& spec, std::span<const double> x, std::uint64_t seed) {
  const MatrixXd K = kernel_matrix(spec, x);
  const auto n = K.rows();
  auto rng = make_engine(seed, {0x47505341ULL});
  std::normal_distribution<double> nd(0.0, 1.0);
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(rng);
  for (double jitter = 1e-7; jitter <= 1e-4 * (1 + 1e-9); jitter *= 10.0) {
    MatrixXd A = K;
    A.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.matrixL() * z;
  }
  throw Error(ErrorCode::CholeskyFailure,
              "covariance of " + spec.label() + " is not positive definite even with jitter 1e-4");
}

TruthSpec parse_truth(std::string_view label) {
  const std::string_view head = label.substr(0, label.find('-'));
  if (head == "SE" || head == "RQ" || head == "Periodic" || head.starts_with("Mat")) {
    return KernelSpec::parse(label);
  }
  return NamedCurve::parse(label);
}

std::string truth_label(const TruthSpec& t) {
  return std::visit([](const auto& v) { return v.label(); }, t);
}

std::pair<double, double> truth_domain(const TruthSpec& t) {
  if (const auto* c = std::get_if<NamedCurve>(&t)) return c->domain();
  return {-1.0, 1.0};
}

}  // namespace mdspline

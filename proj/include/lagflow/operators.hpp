#pragma once

// The Lagrangian-angle operator family F_tau on the positive cone.
//
//   0 < tau < pi/4   F = sqrt(a^2+1)/(2b) * sum ln((l+a-b)/(l+a+b))
//   tau = pi/4       F = -sqrt(2) * sum 1/(1+l)
//   pi/4 < tau < pi/2 F = sqrt(a^2+1)/b * sum arctan((l+a-b)/(l+a+b))
//   tau = pi/2       F = sum arctan(l)
//
// with a = cot(tau), b = sqrt(|cot^2(tau) - 1|). Every branch is a sum of one
// scalar term per eigenvalue, so gradients and Hessians are diagonal.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lagflow/error.hpp"

namespace lagflow {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;
/// Angles within this distance of pi/4 or pi/2 use the exact branch formula.
inline constexpr double kBranchTolerance = 1e-12;

enum class Branch { Log, Inverse, Arctan, PureArctan };

constexpr const char* to_string(Branch b) noexcept {
  switch (b) {
    case Branch::Log: return "log";
    case Branch::Inverse: return "inverse";
    case Branch::Arctan: return "arctan";
    case Branch::PureArctan: return "pure-arctan";
  }
  return "?";
}

/// Eigenvalue vector in the open positive cone. Order is not significant.
class Spectrum {
 public:
  Spectrum(std::initializer_list<double> values) : values_(values) { validate(); }
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) { validate(); }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  /// Componentwise reciprocal, mapping dual eigenvalues to primal ones.
  Spectrum reciprocal() const {
    std::vector<double> r(values_.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = 1.0 / values_[i];
    return Spectrum(std::move(r));
  }

 private:
  void validate() const {
    if (values_.empty()) throw Error(ErrorKind::InvalidArgument, "empty spectrum");
    for (double v : values_) {
      if (!(v > 0.0)) {
        throw Error(ErrorKind::NonPositiveEigenvalue, "eigenvalue " + std::to_string(v) + " is not positive");
      }
    }
  }

  std::vector<double> values_;
};

/// Dense square matrix, row-major. Only used for the small n x n Hessians.
class SquareMatrix {
 public:
  explicit SquareMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> data_;
};

/// One member of the operator family, fixed by the angle tau in (0, pi/2].
class Tau {
 public:
  explicit Tau(double tau) : tau_(tau) {
    if (!std::isfinite(tau)) throw Error(ErrorKind::InvalidArgument, "tau is not finite");
    if (tau <= kBranchTolerance) {
      throw Error(ErrorKind::TauZeroUnsupported,
                  "tau = " + std::to_string(tau) + " selects the Monge-Ampere operator, whose range is unbounded");
    }
    if (tau > kPi / 2 + kBranchTolerance) {
      throw Error(ErrorKind::InvalidArgument, "tau = " + std::to_string(tau) + " exceeds pi/2");
    }
    const double s = std::sin(tau);
    a_ = std::cos(tau) / s;
    // cot^2 - 1 = cos(2 tau) / sin^2, without cancellation near pi/4.
    b_ = std::sqrt(std::abs(std::cos(2.0 * tau))) / s;
    root_ = std::sqrt(a_ * a_ + 1.0);
    if (std::abs(tau - kPi / 4) <= kBranchTolerance) {
      branch_ = Branch::Inverse;
      a_ = 1.0;
      b_ = 0.0;
      root_ = kSqrt2;
    } else if (std::abs(tau - kPi / 2) <= kBranchTolerance) {
      branch_ = Branch::PureArctan;
      a_ = 0.0;
      b_ = 1.0;
      root_ = 1.0;
    } else if (tau < kPi / 4) {
      branch_ = Branch::Log;
    } else {
      branch_ = Branch::Arctan;
    }
    apb_ = a_ + b_;
    // a^2 - b^2 = 1 on the log branch, so a - b = 1/(a + b) is free of cancellation.
    amb_ = branch_ == Branch::Log ? 1.0 / apb_ : a_ - b_;
  }

  double angle() const noexcept { return tau_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  Branch branch() const noexcept { return branch_; }

  /// Per-eigenvalue summand of F.
  double term(double l) const noexcept {
    switch (branch_) {
      case Branch::Log: {
        const double den = l + apb_;
        const double r = 2.0 * b_ / den;
        const double lg = r < 0.5 ? std::log1p(-r) : std::log((l + amb_) / den);
        return root_ / (2.0 * b_) * lg;
      }
      case Branch::Inverse: return -kSqrt2 / (1.0 + l);
      case Branch::Arctan: return root_ / b_ * std::atan((l + amb_) / (l + apb_));
      case Branch::PureArctan: return std::atan(l);
    }
    return 0.0;
  }

  double term_slope(double l) const noexcept {
    switch (branch_) {
      case Branch::Log: return root_ / ((l + amb_) * (l + apb_));
      case Branch::Inverse: return kSqrt2 / ((1.0 + l) * (1.0 + l));
      case Branch::Arctan: {
        const double s = l + a_;
        return root_ / (s * s + b_ * b_);
      }
      case Branch::PureArctan: return 1.0 / (1.0 + l * l);
    }
    return 0.0;
  }

  double term_curvature(double l) const noexcept {
    switch (branch_) {
      case Branch::Log: {
        const double d = (l + amb_) * (l + apb_);
        return -2.0 * root_ * (l + a_) / (d * d);
      }
      case Branch::Inverse: {
        const double s = 1.0 + l;
        return -2.0 * kSqrt2 / (s * s * s);
      }
      case Branch::Arctan: {
        const double s = l + a_;
        const double d = s * s + b_ * b_;
        return -2.0 * root_ * s / (d * d);
      }
      case Branch::PureArctan: {
        const double d = 1.0 + l * l;
        return -2.0 * l / (d * d);
      }
    }
    return 0.0;
  }

  /// d/dmu of the dual summand -term(1/mu), written directly in mu.
  double dual_term_slope(double mu) const noexcept {
    switch (branch_) {
      case Branch::Log: {
        const double p = 1.0 + a_ * mu;
        const double q = b_ * mu;
        return root_ / ((p - q) * (p + q));
      }
      case Branch::Inverse: return kSqrt2 / ((1.0 + mu) * (1.0 + mu));
      case Branch::Arctan: {
        const double p = 1.0 + a_ * mu;
        const double q = b_ * mu;
        return root_ / (p * p + q * q);
      }
      case Branch::PureArctan: return 1.0 / (1.0 + mu * mu);
    }
    return 0.0;
  }

  double dual_term_curvature(double mu) const noexcept {
    switch (branch_) {
      case Branch::Log: {
        const double p = 1.0 + a_ * mu;
        const double q = b_ * mu;
        const double d = (p - q) * (p + q);
        return -2.0 * root_ * (mu + a_) / (d * d);
      }
      case Branch::Inverse: {
        const double s = 1.0 + mu;
        return -2.0 * kSqrt2 / (s * s * s);
      }
      case Branch::Arctan: {
        const double p = 1.0 + a_ * mu;
        const double q = b_ * mu;
        const double d = p * p + q * q;
        return -2.0 * root_ * (mu + a_) / (d * d);
      }
      case Branch::PureArctan: {
        const double d = 1.0 + mu * mu;
        return -2.0 * mu / (d * d);
      }
    }
    return 0.0;
  }

  /// term(l) - term_at_infinity() without forming the arctan-branch
  /// constant, which grows like 1/b as tau -> pi/4 from above.
  double term_from_top(double l) const noexcept {
    switch (branch_) {
      case Branch::Log:
      case Branch::Inverse: return term(l);
      case Branch::Arctan: return -root_ / b_ * std::atan(b_ / (l + a_));
      case Branch::PureArctan: return -std::atan(1.0 / l);
    }
    return 0.0;
  }

  /// Limit of term(l) as l -> 0+.
  double term_at_zero() const noexcept {
    switch (branch_) {
      case Branch::Log: return root_ / (2.0 * b_) * std::log(amb_ / apb_);
      case Branch::Inverse: return -kSqrt2;
      case Branch::Arctan: return root_ / b_ * std::atan(amb_ / apb_);
      case Branch::PureArctan: return 0.0;
    }
    return 0.0;
  }

  /// Limit of term(l) as l -> +infinity.
  double term_at_infinity() const noexcept {
    switch (branch_) {
      case Branch::Log:
      case Branch::Inverse: return 0.0;
      case Branch::Arctan: return kPi * root_ / (4.0 * b_);
      case Branch::PureArctan: return kPi / 2;
    }
    return 0.0;
  }

 private:
  double tau_;
  double a_ = 0.0;
  double b_ = 0.0;
  double root_ = 1.0;  // sqrt(a^2 + 1)
  double apb_ = 0.0;
  double amb_ = 0.0;
  Branch branch_ = Branch::PureArctan;
};

inline double eval(const Tau& op, const Spectrum& s) {
  double sum = 0.0;
  for (double l : s) sum += op.term(l);
  return sum;
}

/// (F(0,...,0), F(+inf,...,+inf)) for dimension n.
/// F(l) - F(+inf), well conditioned for every tau.
inline double eval_from_top(const Tau& op, const Spectrum& s) {
  double sum = 0.0;
  for (double l : s) sum += op.term_from_top(l);
  return sum;
}

inline std::pair<double, double> endpoints(const Tau& op, int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be at least 1");
  return {n * op.term_at_zero(), n * op.term_at_infinity()};
}

inline std::vector<double> grad(const Tau& op, const Spectrum& s) {
  std::vector<double> g(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) g[i] = op.term_slope(s[i]);
  return g;
}

inline SquareMatrix hess(const Tau& op, const Spectrum& s) {
  SquareMatrix h(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) h(i, i) = op.term_curvature(s[i]);
  return h;
}

/// Dual operator: F~(mu) = -F(1/mu_1, ..., 1/mu_n).
inline double dual_eval(const Tau& op, const Spectrum& mu) { return -eval(op, mu.reciprocal()); }

inline std::vector<double> dual_grad(const Tau& op, const Spectrum& mu) {
  std::vector<double> g(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) g[i] = op.dual_term_slope(mu[i]);
  return g;
}

inline SquareMatrix dual_hess(const Tau& op, const Spectrum& mu) {
  SquareMatrix h(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) h(i, i) = op.dual_term_curvature(mu[i]);
  return h;
}

/// Closed interval [lambda1, lambda2] bounding a gradient sum on the truncated
/// cone {min l <= s1, max l >= s2}.
struct StructureWindow {
  double s1 = 0.0;
  double s2 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  bool contains(double v, double slack = 0.0) const noexcept {
    return v >= lambda1 - slack && v <= lambda2 + slack;
  }
};

/// Windows for sum dF/dl_i (first) and sum dF/dl_i * l_i^2 (second).
inline std::pair<StructureWindow, StructureWindow> structure_window(const Tau& op, double s1, double s2, int n) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw Error(ErrorKind::InvalidWindow, "s1 and s2 must be positive");
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be at least 1");
  StructureWindow trace{s1, s2, 0.0, 0.0};
  StructureWindow weighted{s1, s2, 0.0, 0.0};
  // term_slope is decreasing in l and l^2 * term_slope is increasing, so the
  // lower ends come from the extreme eigenvalues and the upper ends from the
  // limits at 0 and infinity.
  const double top = n * op.term_slope(0.0);
  switch (op.branch()) {
    case Branch::Log:
    case Branch::Arctan: {
      const double root = std::sqrt(op.a() * op.a() + 1.0);
      trace.lambda2 = top;
      weighted.lambda2 = n * root;
      break;
    }
    case Branch::Inverse:
      trace.lambda2 = n * kSqrt2;
      weighted.lambda2 = n * kSqrt2;
      break;
    case Branch::PureArctan:
      trace.lambda2 = n;
      weighted.lambda2 = n;
      break;
  }
  trace.lambda1 = op.term_slope(s1);
  weighted.lambda1 = s2 * s2 * op.term_slope(s2);
  return {trace, weighted};
}

}  // namespace lagflow

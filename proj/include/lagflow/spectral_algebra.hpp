#pragma once

// 2x2 symmetric matrix utilities: closed-form eigendecomposition and the
// matrix operator F[A] = F(lambda(A)) with its derivative F^{ij}.

#include <array>
#include <cmath>

#include "lagflow/error.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/vec2.hpp"

namespace lagflow {

struct SymMatrix2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  constexpr double trace() const noexcept { return a11 + a22; }
  constexpr double det() const noexcept { return a11 * a22 - a12 * a12; }
  constexpr Vec2 operator*(Vec2 v) const noexcept { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }
  /// v^T A v
  constexpr double quad(Vec2 v) const noexcept { return a11 * v.x * v.x + 2.0 * a12 * v.x * v.y + a22 * v.y * v.y; }
  /// Frobenius norm.
  double norm() const noexcept { return std::sqrt(a11 * a11 + 2.0 * a12 * a12 + a22 * a22); }

  SymMatrix2 inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d)) throw Error(ErrorKind::SingularHessian, "matrix is singular");
    return {a22 / d, -a12 / d, a11 / d};
  }

  friend constexpr SymMatrix2 operator+(SymMatrix2 a, SymMatrix2 b) noexcept {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a22 + b.a22};
  }
  friend constexpr SymMatrix2 operator-(SymMatrix2 a, SymMatrix2 b) noexcept {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a22 - b.a22};
  }
  friend constexpr SymMatrix2 operator*(double s, SymMatrix2 a) noexcept { return {s * a.a11, s * a.a12, s * a.a22}; }
  friend constexpr bool operator==(SymMatrix2, SymMatrix2) = default;
};

/// Columns are eigenvectors: column 0 belongs to the smaller eigenvalue.
struct Mat2 {
  std::array<std::array<double, 2>, 2> m{};  // m[row][col]

  constexpr double operator()(int r, int c) const noexcept { return m[r][c]; }
  constexpr Vec2 column(int c) const noexcept { return {m[0][c], m[1][c]}; }
};

struct EigenPair {
  std::array<double, 2> lambdas{};  // ascending
  Mat2 vectors;
};

/// Ascending eigenvalues only; the hot path of the flow.
inline std::array<double, 2> eigenvalues(const SymMatrix2& A) noexcept {
  const double mean = 0.5 * (A.a11 + A.a22);
  const double d = 0.5 * (A.a11 - A.a22);
  const double r = std::sqrt(d * d + A.a12 * A.a12);
  return {mean - r, mean + r};
}

namespace detail {
// Sign convention: the largest-magnitude component is positive (ties go to
// the first component).
inline Vec2 canonical_sign(Vec2 v) noexcept {
  const double lead = std::abs(v.y) > std::abs(v.x) ? v.y : v.x;
  return lead < 0.0 ? -v : v;
}
}  // namespace detail

inline EigenPair eigen(const SymMatrix2& A) noexcept {
  EigenPair out;
  out.lambdas = eigenvalues(A);
  const double top = out.lambdas[1];
  Vec2 v1{1.0, 0.0};
  if (out.lambdas[1] - out.lambdas[0] > 0.0) {
    const Vec2 c1{A.a12, top - A.a11};
    const Vec2 c2{top - A.a22, A.a12};
    const Vec2 c = norm(c1) >= norm(c2) ? c1 : c2;
    const double n = norm(c);
    if (n > 0.0) v1 = c / n;
  } else {
    v1 = {0.0, 1.0};
  }
  Vec2 v0{v1.y, -v1.x};
  v0 = detail::canonical_sign(v0);
  v1 = detail::canonical_sign(v1);
  out.vectors.m[0][0] = v0.x;
  out.vectors.m[1][0] = v0.y;
  out.vectors.m[0][1] = v1.x;
  out.vectors.m[1][1] = v1.y;
  return out;
}

/// F[A] = F(lambda_1(A), lambda_2(A)).
inline double apply_operator(const Tau& op, const SymMatrix2& A) {
  const auto l = eigenvalues(A);
  if (!(l[0] > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "minimum eigenvalue " + std::to_string(l[0]));
  return op.term(l[0]) + op.term(l[1]);
}

/// F^{ij} = dF[A]/da_{ij} = V diag(dF/dl_1, dF/dl_2) V^T.
inline SymMatrix2 operator_derivative(const Tau& op, const SymMatrix2& A) {
  const EigenPair e = eigen(A);
  if (!(e.lambdas[0] > 0.0)) {
    throw Error(ErrorKind::NotPositiveDefinite, "minimum eigenvalue " + std::to_string(e.lambdas[0]));
  }
  const double g0 = op.term_slope(e.lambdas[0]);
  const double g1 = op.term_slope(e.lambdas[1]);
  const Vec2 v0 = e.vectors.column(0);
  const Vec2 v1 = e.vectors.column(1);
  return {g0 * v0.x * v0.x + g1 * v1.x * v1.x, g0 * v0.x * v0.y + g1 * v1.x * v1.y,
          g0 * v0.y * v0.y + g1 * v1.y * v1.y};
}

}  // namespace lagflow

#pragma once

// Pass/fail tables for the check-operator, check-domain and legendre-verify
// subcommands. Each row is an invariant evaluated at user-chosen parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/grid.hpp"
#include "lagflow/legendre.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/spectral_algebra.hpp"

namespace lagflow {

struct CheckRow {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CheckTable {
  std::string title;
  std::vector<std::string> info;
  std::vector<CheckRow> rows;

  bool all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
  }

  void add(std::string name, bool pass, std::string detail) {
    rows.push_back({std::move(name), pass, std::move(detail)});
  }

  void print(std::ostream& os) const {
    os << title << '\n';
    for (const auto& line : info) os << "  " << line << '\n';
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    for (const auto& r : rows) {
      os << "  " << (r.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(static_cast<int>(width)) << r.name
         << "  " << r.detail << '\n';
    }
    const auto failed = std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return !r.pass; });
    if (failed == 0) {
      os << "all " << rows.size() << " checks passed\n";
    } else {
      os << failed << " of " << rows.size() << " checks failed\n";
    }
  }
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

inline std::string fixed(double v, int digits = 12) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(std::log(lo), std::log(hi));
  return std::exp(d(rng));
}

}  // namespace detail

/// Derivative, concavity, duality and window checks at random spectra in
/// (1e-2, 1e2)^2.
inline CheckTable check_operator(double tau, int samples, std::uint64_t seed, double s1 = 1.0, double s2 = 2.0) {
  if (samples < 1) throw Error(ErrorKind::InvalidArgument, "samples must be positive");
  const Tau op(tau);
  CheckTable t;
  t.title = "check-operator tau=" + detail::fixed(tau) + " samples=" + std::to_string(samples);
  t.info.push_back(std::string("branch: ") + std::string(to_string(op.branch())));
  const auto [lo_end, hi_end] = endpoints(op, 2);
  t.info.push_back("F(1,1) = " + detail::fixed(eval(op, {1.0, 1.0}), 15));
  t.info.push_back("endpoints (n=2): F(0) = " + detail::fixed(lo_end, 15) + ", F(inf) = " + detail::fixed(hi_end, 15));

  std::mt19937_64 rng(seed);
  double grad_err = 0, hess_err = 0, hess_max = -std::numeric_limits<double>::infinity(), grad_min = 1e300;
  double dual_err = 0, dual_concave = -std::numeric_limits<double>::infinity();
  bool in_range = true;
  for (int k = 0; k < samples; ++k) {
    const double l1 = detail::log_uniform(rng, 1e-2, 1e2);
    const double l2 = detail::log_uniform(rng, 1e-2, 1e2);
    const Spectrum s{l1, l2};
    const double v = eval(op, s);
    in_range = in_range && v > lo_end && v < hi_end;
    const auto g = grad(op, s);
    const auto H = hess(op, s);
    grad_min = std::min({grad_min, g[0], g[1]});
    hess_max = std::max({hess_max, H(0, 0), H(1, 1)});

    // Differences of F - F(inf): the raw arctan-branch value carries a large
    // constant just above pi/4.
    const double e = 1e-6 * l1;
    const double fd = (eval_from_top(op, {l1 + e, l2}) - eval_from_top(op, {l1 - e, l2})) / (2 * e);
    grad_err = std::max(grad_err, std::abs(g[0] - fd) / (std::abs(fd) + 1e-12));
    const double e2 = 1e-5 * l1;
    const double fd2 = (grad(op, {l1 + e2, l2})[0] - grad(op, {l1 - e2, l2})[0]) / (2 * e2);
    hess_err = std::max(hess_err, std::abs(H(0, 0) - fd2) / (std::abs(fd2) + 1e-14));

    const auto dg = dual_grad(op, {1 / l1, 1 / l2});
    dual_err = std::max({dual_err, std::abs(dg[0] - l1 * l1 * g[0]) / std::max(1.0, std::abs(dg[0])),
                         std::abs(dg[1] - l2 * l2 * g[1]) / std::max(1.0, std::abs(dg[1]))});
    const double m1 = l1, m2 = l2;
    const double em = 1e-4 * m1;
    auto dual_top = [&](double a, double b) { return -eval_from_top(op, Spectrum{a, b}.reciprocal()); };
    const double fdd = (dual_top(m1 + em, m2) - 2 * dual_top(m1, m2) + dual_top(m1 - em, m2)) / (em * em);
    dual_concave = std::max(dual_concave, fdd);
  }
  t.add("values inside (F(0), F(inf))", in_range, "");
  t.add("gradient matches central differences", grad_err < 1e-6, "max rel err " + detail::sci(grad_err));
  t.add("hessian matches differences of gradient", hess_err < 1e-6, "max rel err " + detail::sci(hess_err));
  t.add("monotone: dF/dl_i > 0", grad_min > 0.0, "min " + detail::sci(grad_min));
  t.add("concave: hessian eigenvalues <= 1e-10", hess_max <= 1e-10, "max " + detail::sci(hess_max));
  t.add("dual slope identity to 1e-10", dual_err < 1e-10, "max err " + detail::sci(dual_err));
  t.add("dual concave: second differences <= 1e-6", dual_concave <= 1e-6, "max " + detail::sci(dual_concave));

  const auto [trace, weighted] = structure_window(op, s1, s2, 2);
  t.info.push_back("trace window [" + detail::fixed(trace.lambda1) + ", " + detail::fixed(trace.lambda2) +
                   "], weighted window [" + detail::fixed(weighted.lambda1) + ", " + detail::fixed(weighted.lambda2) +
                   "] at s1=" + detail::fixed(s1) + ", s2=" + detail::fixed(s2));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t outside_trace = 0, outside_weighted = 0;
  for (int k = 0; k < samples; ++k) {
    const double lo = s1 * u(rng) + 1e-12;
    const double hi = s2 + (1e3 - s2) * u(rng);
    const auto g = grad(op, {lo, hi});
    if (!trace.contains(g[0] + g[1], 1e-12)) ++outside_trace;
    if (!weighted.contains(lo * lo * g[0] + hi * hi * g[1], 1e-12)) ++outside_weighted;
  }
  t.add("trace window contains sum dF/dl_i", outside_trace == 0, std::to_string(outside_trace) + " outside");
  t.add("weighted window contains sum l_i^2 dF/dl_i", outside_weighted == 0,
        std::to_string(outside_weighted) + " outside");
  return t;
}

/// Closed-form constants of the defining function against sampled values.
inline CheckTable check_domain(const ConvexDomain& d, int samples, std::uint64_t seed) {
  if (samples < 8) throw Error(ErrorKind::InvalidArgument, "samples must be at least 8");
  CheckTable t;
  const auto [a1, a2] = d.semi_axes();
  t.title = std::string("check-domain ") + (d.kind() == DomainKind::Disc ? "disc" : "ellipse") + " center=(" +
            detail::fixed(d.center().x) + ", " + detail::fixed(d.center().y) + ") semi_axes=(" + detail::fixed(a1) +
            ", " + detail::fixed(a2) + ")";
  const auto [glo, ghi] = d.grad_bounds();
  t.info.push_back("theta (concavity constant) = " + detail::fixed(d.theta(), 15));
  t.info.push_back("boundary |Dh| bounds = [" + detail::fixed(glo, 15) + ", " + detail::fixed(ghi, 15) + "]");
  t.info.push_back("h(center) = " + detail::fixed(d.scale(), 15));

  const auto boundary = d.sample_boundary(static_cast<std::size_t>(samples));
  double h_err = 0, mn = std::numeric_limits<double>::infinity(), mx = 0, normal_err = 0;
  bool inward = true;
  for (const auto& b : boundary) {
    h_err = std::max(h_err, std::abs(d.h(b.position)));
    const double g = norm(d.h_grad(b.position));
    mn = std::min(mn, g);
    mx = std::max(mx, g);
    normal_err = std::max(normal_err, norm(b.inward_normal - d.h_grad(b.position) / g));
    inward = inward && d.contains(b.position + 1e-6 * std::max(a1, a2) * b.inward_normal);
  }
  t.add("h vanishes on the boundary", h_err < 1e-12, "max |h| " + detail::sci(h_err));
  const double tol = 1e-6 * ghi;
  t.add("sampled min |Dh| matches lower bound", std::abs(mn - glo) < tol, "sampled " + detail::fixed(mn));
  t.add("sampled max |Dh| matches upper bound", std::abs(mx - ghi) < tol, "sampled " + detail::fixed(mx));
  t.add("inward normal is Dh/|Dh| and points inside", inward && normal_err < 1e-12, "max err " + detail::sci(normal_err));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-2.0 * a1, 2.0 * a1), uy(-2.0 * a2, 2.0 * a2), ang(0.0, 2.0 * kPi);
  double worst = -std::numeric_limits<double>::infinity();
  double proj_err = 0;
  for (int k = 0; k < samples; ++k) {
    const Vec2 p = d.center() + Vec2{ux(rng), uy(rng)};
    const double th = ang(rng);
    const Vec2 dir{std::cos(th), std::sin(th)};
    const double s = 1e-3 * std::min(a1, a2);
    worst = std::max(worst, (d.h(p + s * dir) - 2 * d.h(p) + d.h(p - s * dir)) / (s * s));
    if (d.contains(p)) {
      const auto b = d.project_to_boundary(p);
      proj_err = std::max(proj_err, std::abs(d.h(b.position)));
    }
  }
  t.add("second directional derivatives <= -theta", worst <= -d.theta() + 1e-6 * d.theta(),
        "max " + detail::fixed(worst));
  t.add("projection lands on the boundary", proj_err < 1e-10, "max |h| " + detail::sci(proj_err));
  return t;
}

/// Convex test fields on the unit disc for legendre-verify.
struct LegendreField {
  std::string name;
  std::function<double(Vec2)> u;
  std::function<Vec2(Vec2)> gradient;
};

inline LegendreField parse_field(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  if (kind == "quadratic") {
    double a = 2.0, b = 1.0;
    if (colon != std::string::npos) {
      const std::string args = spec.substr(colon + 1);
      const auto comma = args.find(',');
      if (comma == std::string::npos) throw Error(ErrorKind::InvalidArgument, "expected quadratic:a,b");
      try {
        a = std::stod(args.substr(0, comma));
        b = std::stod(args.substr(comma + 1));
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "expected quadratic:a,b with numbers");
      }
    }
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "quadratic coefficients must be positive");
    return {spec, [a, b](Vec2 x) { return 0.5 * (a * x.x * x.x + b * x.y * x.y); },
            [a, b](Vec2 x) { return Vec2{a * x.x, b * x.y}; }};
  }
  if (colon != std::string::npos) throw Error(ErrorKind::InvalidArgument, kind + " takes no parameters");
  if (kind == "quartic") {
    return {kind, [](Vec2 x) { return 0.5 * dot(x, x) + std::pow(x.x, 4) / 12; },
            [](Vec2 x) { return Vec2{x.x + std::pow(x.x, 3) / 3, x.y}; }};
  }
  if (kind == "exp") {
    return {kind, [](Vec2 x) { return 0.5 * dot(x, x) + 0.1 * std::exp(x.x + 0.5 * x.y); },
            [](Vec2 x) {
              const double e = 0.1 * std::exp(x.x + 0.5 * x.y);
              return Vec2{x.x + e, x.y + 0.5 * e};
            }};
  }
  if (kind == "radial") {
    return {kind, [](Vec2 x) { return 0.5 * dot(x, x) + dot(x, x) * dot(x, x) / 8; },
            [](Vec2 x) { return (1.0 + 0.5 * dot(x, x)) * x; }};
  }
  throw Error(ErrorKind::InvalidArgument, "unknown field '" + spec + "' (quadratic:a,b, quartic, exp, radial)");
}

/// Involution, Hessian reciprocity and gradient inversion for a field on the
/// unit disc. The image grid covers an ellipse around the sampled gradient
/// image.
inline CheckTable legendre_verify(const LegendreField& field, double spacing, int threads) {
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "spacing must be positive");
  const ConvexDomain disc = ConvexDomain::disc({0, 0}, 1.0);
  const FlowGrid g = build_grid(disc, spacing);
  const FlowState s = sample_field(g, field.u);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& b : disc.sample_boundary(2048)) {
    const Vec2 p = field.gradient(b.position);
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  // Circumscribes the bounding box of the gradient image.
  const ConvexDomain image = ConvexDomain::ellipse({0.5 * (xmin + xmax), 0.5 * (ymin + ymax)},
                                                   kSqrt2 * 0.5 * (xmax - xmin), kSqrt2 * 0.5 * (ymax - ymin));
  const FlowGrid tg = build_grid(image, spacing);

  double lmin = std::numeric_limits<double>::infinity(), lmax = 0.0;
  for (int id : g.interior()) {
    const auto l = eigenvalues(detail::hessian_at(s.u, g, id));
    lmin = std::min(lmin, l[0]);
    lmax = std::max(lmax, l[1]);
  }
  if (!(lmin > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "field is not discretely convex");
  const double c = (lmax + 1.0 / lmin) / 4.0;

  const DualField d = legendre_transform(s, g, tg, threads);
  CheckTable t;
  t.title = "legendre-verify field=" + field.name + " spacing=" + detail::fixed(spacing);
  t.info.push_back("Hessian eigenvalues in [" + detail::fixed(lmin, 6) + ", " + detail::fixed(lmax, 6) +
                   "], involution constant C = " + detail::fixed(c, 6));
  t.info.push_back("dual nodes valid: " + std::to_string(d.valid_count()));

  std::size_t convex = 0, stencil = 0;
  for (int id = 0; id < tg.size(); ++id) {
    if (!d.has_stencil(id)) continue;
    ++stencil;
    if (eigenvalues(d.hessian(id))[0] > 0.0) ++convex;
  }
  t.add("dual convex at stencil-complete nodes", stencil > 0 && convex == stencil,
        std::to_string(convex) + "/" + std::to_string(stencil));
  const double h = spacing;
  const LegendreCheck inv = involution_error(s, g, d, threads);
  t.add("involution |u** - u| < C h^2", inv.compared > 0 && inv.max_error < c * h * h,
        "max " + detail::sci(inv.max_error) + " vs " + detail::sci(c * h * h) + " over " +
            std::to_string(inv.compared) + " nodes");
  const LegendreCheck rec = hessian_reciprocity(s, g, d);
  t.add("Hessian reciprocity < 10 h", rec.compared > 0 && rec.max_error < 10 * h,
        "max " + detail::sci(rec.max_error) + " over " + std::to_string(rec.compared) + " nodes");
  const LegendreCheck inv_grad = gradient_inversion(s, g, d);
  t.add("gradient inversion |Du~(Du(x)) - x| < 10 h", inv_grad.compared > 0 && inv_grad.max_error < 10 * h,
        "max " + detail::sci(inv_grad.max_error) + " over " + std::to_string(inv_grad.compared) + " nodes");
  return t;
}

}  // namespace lagflow

#pragma once
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

// Adaptive Simpson quadrature. All improper integrals in the library are
// reduced to finite intervals by the callers (laws truncate at extreme
// quantiles), so only finite [a,b] is handled here.

namespace lbaft {

namespace detail {

template <class F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  // once the correction sits at the rounding noise of the panel itself,
  // further splitting cannot improve the estimate no matter how small a
  // tolerance was requested (e.g. when a cancelling integral pins the
  // relative tolerance below machine precision)
  double scale = (m - a) / 6.0 * (std::abs(fa) + 4.0 * std::abs(flm) + std::abs(fm)) +
                 (b - m) / 6.0 * (std::abs(fm) + 4.0 * std::abs(frm) + std::abs(fb));
  double floor = 16.0 * std::numeric_limits<double>::epsilon() * scale;
  if (depth <= 0 || std::abs(delta) <= std::max(15.0 * tol, floor))
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
double integrate(F&& f, double a, double b, double abstol = 1e-8, int maxDepth = 48) {
  if (!(std::isfinite(a) && std::isfinite(b))) throw std::invalid_argument("integrate: nonfinite limits");
  if (a == b) return 0.0;
  double sign = 1.0;
  if (a > b) { std::swap(a, b); sign = -1.0; }
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double v = detail::simpson_rec(f, a, b, fa, fm, fb, whole, abstol, maxDepth);
  if (!std::isfinite(v)) throw std::runtime_error("integrate: nonfinite integral");
  return sign * v;
}

// Integrate with tolerance tightened relative to the result's own magnitude:
// a cheap first pass fixes the scale, the second pass refines.  Needed where
// ratios of small tail integrals must stay accurate.
template <class F>
double integrate_rel(F&& f, double a, double b, double reltol = 1e-11, double floortol = 1e-300) {
  double rough = integrate(f, a, b, 1e-8);
  double tol = std::max(std::abs(rough) * reltol, floortol);
  if (tol >= 1e-8) return rough;
  return integrate(f, a, b, tol);
}

}  // namespace lbaft

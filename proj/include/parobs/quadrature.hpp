#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace parobs {

namespace quad_detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adapt(F&& f, double a, double b, double fa, double fm, double fb, double whole,
             double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
         + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace quad_detail

/// Adaptive Simpson quadrature of f over [a,b] to relative tolerance rel_tol
/// (with a tiny absolute floor so integrals through zero terminate).
template <class F>
double adaptive_simpson(F&& f, double a, double b, double rel_tol = 1e-10, int max_depth = 48) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = quad_detail::simpson(a, b, fa, fm, fb);
    const double tol = rel_tol * std::max(std::abs(whole), 1e-30) + 1e-300;
    return quad_detail::adapt(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

} // namespace parobs

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parobs/geometry.hpp"
#include "parobs/quadrature.hpp"

// Closed-form solution catalogue: the one-dimensional two-phase profile, the
// global profile w*, polynomial caloric solutions and the backward
// self-similar ODE families. Every profile evaluates at arbitrary points and
// samples onto grids.

namespace parobs {

namespace exact_detail {

inline std::vector<double> unit_vector(std::vector<double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    const double norm = std::sqrt(s);
    if (!(norm > 0.0)) throw std::invalid_argument("profile direction must be nonzero");
    for (double& c : v) c /= norm;
    return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// lam_plus/2 * max(s,0)^2 - lam_minus/2 * max(-s,0)^2 along s = x.direction.
inline double two_phase_value(double s, double lam_plus, double lam_minus) {
    return s >= 0.0 ? 0.5 * lam_plus * s * s : -0.5 * lam_minus * s * s;
}
inline double two_phase_slope(double s, double lam_plus, double lam_minus) {
    return s >= 0.0 ? lam_plus * s : -lam_minus * s;
}

} // namespace exact_detail

/// The one-dimensional profile lam+/2 max(s,0)^2 - lam-/2 min(s,0)^2 with
/// s = x . direction (a rotation of the x1 axis). Time-independent.
struct HProfile {
    double lambda_plus = 1.0;
    double lambda_minus = 1.0;
    std::vector<double> direction;

    HProfile(double lp, double lm, std::vector<double> dir)
        : lambda_plus(lp), lambda_minus(lm), direction(exact_detail::unit_vector(std::move(dir))) {
        if (!(lp > 0.0) || !(lm > 0.0))
            throw std::invalid_argument("HProfile: coefficients must be > 0");
    }

    double value(const Point& p) const {
        // min(s,0)^2 carries the negative-phase sign, so the two-phase form applies.
        return exact_detail::two_phase_value(exact_detail::dot(p.x, direction),
                                             lambda_plus, lambda_minus);
    }
    std::vector<double> gradient(const Point& p) const {
        const double g = exact_detail::two_phase_slope(exact_detail::dot(p.x, direction),
                                                       lambda_plus, lambda_minus);
        std::vector<double> out(direction.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = g * direction[i];
        return out;
    }
    double time_derivative(const Point&) const { return 0.0; }

    ScalarField sample_onto(const GridSpec& g) const {
        return parobs::sample(g, [this](const Point& p) { return value(p); });
    }
};

/// The global profile lam+ max(s,0)^2/2 - lam- max(-s,0)^2/2; identical
/// two-phase shape as HProfile, conventionally aligned with the last axis.
struct WStarProfile {
    double lambda_plus = 1.0;
    double lambda_minus = 1.0;
    std::vector<double> direction;

    WStarProfile(double lp, double lm, std::vector<double> dir)
        : lambda_plus(lp), lambda_minus(lm), direction(exact_detail::unit_vector(std::move(dir))) {
        if (!(lp > 0.0) || !(lm > 0.0))
            throw std::invalid_argument("WStarProfile: coefficients must be > 0");
    }

    double value(const Point& p) const {
        const double s = exact_detail::dot(p.x, direction);
        const double pos = std::max(s, 0.0), neg = std::max(-s, 0.0);
        return 0.5 * lambda_plus * pos * pos - 0.5 * lambda_minus * neg * neg;
    }
    std::vector<double> gradient(const Point& p) const {
        const double g = exact_detail::two_phase_slope(exact_detail::dot(p.x, direction),
                                                       lambda_plus, lambda_minus);
        std::vector<double> out(direction.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = g * direction[i];
        return out;
    }
    double time_derivative(const Point&) const { return 0.0; }

    ScalarField sample_onto(const GridSpec& g) const {
        return parobs::sample(g, [this](const Point& p) { return value(p); });
    }
};

/// z(t,x) = -a0 t + sum a_i x_i^2 with the one-phase compatibility
/// 2 sum(a_i) + a0 = lam+, so z solves the equation wherever z > 0.
struct PolynomialCaloricProfile {
    double a0 = 0.0;
    std::vector<double> a;
    double lambda_plus = 1.0;

    PolynomialCaloricProfile(double a0_, std::vector<double> a_, double lp)
        : a0(a0_), a(std::move(a_)), lambda_plus(lp) {
        if (a0 < 0.0) throw std::invalid_argument("PolynomialCaloricProfile: a0 must be >= 0");
        double sum = 0.0;
        for (double c : a) {
            if (c < 0.0) throw std::invalid_argument("PolynomialCaloricProfile: a_i must be >= 0");
            sum += c;
        }
        if (!(lp > 0.0)) throw std::invalid_argument("PolynomialCaloricProfile: lambda_plus must be > 0");
        if (std::abs(2.0 * sum + a0 - lp) > 1e-12 * std::max(1.0, lp))
            throw std::invalid_argument("PolynomialCaloricProfile: 2*sum(a) + a0 != lambda_plus");
    }

    double value(const Point& p) const {
        double s = -a0 * p.t;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * p.x[i] * p.x[i];
        return s;
    }
    std::vector<double> gradient(const Point& p) const {
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = 2.0 * a[i] * p.x[i];
        return out;
    }
    double time_derivative(const Point&) const { return -a0; }

    ScalarField sample_onto(const GridSpec& g) const {
        return parobs::sample(g, [this](const Point& p) { return value(p); });
    }
};

enum class SelfSimilarBranch { automatic, positive, negative, zero };
enum class GrowthClass { polynomial, superpolynomial };

/// Backward self-similar family: w(t,x) = -t f(x_n / sqrt(-t)) for t < 0 with
///   f = lam+ + C1 (xi^2 - 2) + C2 g(xi)   on {f > 0},
///   f = -lam- + C3 (xi^2 - 2) + C4 g(xi)  on {f < 0},
///   g(xi) = -2 xi e^{xi^2/4} + (xi^2 - 2) Int_0^xi e^{s^2/4} ds.
/// The two branch expressions are kept evaluable separately; the single-valued
/// f prefers the self-consistent positive branch, falls back to the negative
/// one, and is 0 in the gap where neither sign is consistent.
struct SelfSimilarProfile {
    double lambda_plus = 1.0;
    double lambda_minus = 1.0;
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0;
    double quadrature_rel_tol = 1e-10;

    SelfSimilarProfile(double lp, double lm, double c1, double c2, double c3, double c4)
        : lambda_plus(lp), lambda_minus(lm), C1(c1), C2(c2), C3(c3), C4(c4) {
        if (!(lp > 0.0) || !(lm > 0.0))
            throw std::invalid_argument("SelfSimilarProfile: coefficients must be > 0");
    }

    double exp_integral(double xi) const {
        return adaptive_simpson([](double s) { return std::exp(0.25 * s * s); }, 0.0, xi,
                                quadrature_rel_tol);
    }
    double g(double xi) const {
        return -2.0 * xi * std::exp(0.25 * xi * xi) + (xi * xi - 2.0) * exp_integral(xi);
    }

    double branch_positive(double xi) const {
        return lambda_plus + C1 * (xi * xi - 2.0) + (C2 != 0.0 ? C2 * g(xi) : 0.0);
    }
    double branch_negative(double xi) const {
        return -lambda_minus + C3 * (xi * xi - 2.0) + (C4 != 0.0 ? C4 * g(xi) : 0.0);
    }

    std::pair<double, SelfSimilarBranch> f_with_branch(double xi) const {
        const double fp = branch_positive(xi);
        if (fp > 0.0) return {fp, SelfSimilarBranch::positive};
        const double fn = branch_negative(xi);
        if (fn < 0.0) return {fn, SelfSimilarBranch::negative};
        return {0.0, SelfSimilarBranch::zero};
    }
    double f(double xi) const { return f_with_branch(xi).first; }

    /// w(t,x) = -t f(x_n / sqrt(-t)); defined for t < 0 only.
    double value(const Point& p) const {
        if (!(p.t < 0.0))
            throw std::domain_error("SelfSimilarProfile: evaluation requires t < 0");
        const double tau = -p.t;
        return tau * f(p.x.back() / std::sqrt(tau));
    }

    ScalarField sample_onto(const GridSpec& grid) const {
        if (!(grid.time[1] < 0.0))
            throw std::domain_error("SelfSimilarProfile: grid must lie in {t < 0}");
        return parobs::sample(grid, [this](const Point& p) { return value(p); });
    }
};

/// Residual f'' - (xi/2) f' + f - lam+ (positive branch) or + lam- (negative
/// branch) by central differences with the given step. With automatic branch
/// selection the stencil must stay inside one consistent sign region.
inline double ode_residual(const SelfSimilarProfile& prof, double xi, double step,
                           SelfSimilarBranch branch = SelfSimilarBranch::automatic) {
    if (!(step > 0.0)) throw std::invalid_argument("ode_residual: step must be > 0");
    const double xs[3] = {xi - step, xi, xi + step};
    double fv[3];
    if (branch == SelfSimilarBranch::automatic) {
        SelfSimilarBranch b[3];
        for (int i = 0; i < 3; ++i) {
            auto [v, br] = prof.f_with_branch(xs[i]);
            fv[i] = v;
            b[i] = br;
        }
        if (b[0] != b[1] || b[1] != b[2] || b[1] == SelfSimilarBranch::zero)
            throw std::invalid_argument("ode_residual: stencil straddles a sign change");
        branch = b[1];
    } else {
        for (int i = 0; i < 3; ++i)
            fv[i] = branch == SelfSimilarBranch::positive ? prof.branch_positive(xs[i])
                                                          : prof.branch_negative(xs[i]);
        if ((fv[0] > 0.0) != (fv[2] > 0.0) || (fv[0] > 0.0) != (fv[1] > 0.0))
            throw std::invalid_argument("ode_residual: stencil straddles a sign change");
    }
    const double fpp = (fv[2] - 2.0 * fv[1] + fv[0]) / (step * step);
    const double fp = (fv[2] - fv[0]) / (2.0 * step);
    const double rhs = branch == SelfSimilarBranch::positive ? prof.lambda_plus : -prof.lambda_minus;
    return fpp - 0.5 * xi * fp + fv[1] - rhs;
}

/// polynomial iff C2 = C4 = 0; otherwise g grows like e^{xi^2/4}.
inline GrowthClass classify_growth(const SelfSimilarProfile& prof) {
    return (prof.C2 == 0.0 && prof.C4 == 0.0) ? GrowthClass::polynomial
                                              : GrowthClass::superpolynomial;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct RootStructureReport {
    // Brute-force scan over (C1, C3, a): common roots with matching value and
    // nonzero matching derivative. Expected empty.
    bool nonzero_derivative_root_found = false;
    std::vector<std::array<double, 4>> candidates; // (a, C1, C3, f')

    // Per-root analysis: the (C1, C3) forced by f(a) = 0 on both branches
    // always disagree by at least this relative amount.
    double min_required_mismatch = kInfiniteDistance;

    // a = 0 with C1 = lam+/2, C3 = -lam-/2 matches with f'(0) = 0.
    bool zero_derivative_root_at_origin = false;
    double c1_at_origin = 0.0;
    double c3_at_origin = 0.0;
};

/// Scans the two quadratic branches (C2 = C4 = 0 assumed) for common roots a
/// with matching value and derivative over the given coefficient box and root
/// interval.
inline RootStructureReport root_structure(double lambda_plus, double lambda_minus,
                                          Interval c1_range, Interval c3_range,
                                          Interval search_interval,
                                          int coeff_samples = 81, int root_samples = 401) {
    if (!(lambda_plus > 0.0) || !(lambda_minus > 0.0))
        throw std::invalid_argument("root_structure: coefficients must be > 0");
    if (!(search_interval.hi > search_interval.lo))
        throw std::invalid_argument("root_structure: degenerate search interval");
    if (!(c1_range.hi >= c1_range.lo) || !(c3_range.hi >= c3_range.lo))
        throw std::invalid_argument("root_structure: degenerate coefficient range");

    RootStructureReport rep;
    const double value_tol = 1e-6 * std::max(lambda_plus, lambda_minus);
    const double deriv_tol = 1e-6;

    auto lin = [](const Interval& iv, int i, int m) {
        return m == 1 ? iv.lo : iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / (m - 1);
    };

    for (int ia = 0; ia < root_samples; ++ia) {
        const double a = lin(search_interval, ia, root_samples);
        const double q = a * a - 2.0;

        // Required coefficients for f(a) = 0 on each branch; their relative
        // disagreement is (lam+ + lam-)/max(lam+, lam-) regardless of a.
        if (std::abs(q) > 1e-8) {
            const double c1_req = -lambda_plus / q;
            const double c3_req = lambda_minus / q;
            const double mism = std::abs(c1_req - c3_req) / std::max(std::abs(c1_req), std::abs(c3_req));
            rep.min_required_mismatch = std::min(rep.min_required_mismatch, mism);
        }

        for (int i1 = 0; i1 < coeff_samples; ++i1) {
            const double c1 = lin(c1_range, i1, coeff_samples);
            const double fpos = lambda_plus + c1 * q;
            if (std::abs(fpos) > value_tol) continue;
            const double dpos = 2.0 * c1 * a;
            for (int i3 = 0; i3 < coeff_samples; ++i3) {
                const double c3 = lin(c3_range, i3, coeff_samples);
                const double fneg = -lambda_minus + c3 * q;
                if (std::abs(fneg) > value_tol) continue;
                const double dneg = 2.0 * c3 * a;
                if (std::abs(dpos - dneg) <= deriv_tol && std::abs(dpos) > deriv_tol) {
                    rep.nonzero_derivative_root_found = true;
                    rep.candidates.push_back({a, c1, c3, dpos});
                }
            }
        }
    }

    rep.c1_at_origin = 0.5 * lambda_plus;
    rep.c3_at_origin = -0.5 * lambda_minus;
    // f(0) = 0 with those coefficients, and f'(0) = 0 identically.
    rep.zero_derivative_root_at_origin = true;
    return rep;
}

} // namespace parobs

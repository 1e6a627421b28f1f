#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "parobs/geometry.hpp"

// Backward-heat-kernel weighted Dirichlet energies
//   I(r,v) = Int_{-r^2}^0 Int |grad v|^2 G(t,x) dx dt
// and the product functional Phi(r,w) = r^-4 I(r, w+) I(r, w-), which is
// non-decreasing in r when both parts are continuous and subcaloric.
//
// The kernel is mass-normalized, G(t,x) = (4 pi (-t))^(-n/2) exp(|x|^2/(4t));
// with this normalization the trace of the linear field w = x1 is
// radius-independent, which the constancy checks rely on.
//
// Quadrature: midpoint rule in time on dyadically refined subintervals
// toward t -> 0-, where the kernel concentrates. Spatial integrals are
// truncated to a ball whose radius is a fixed multiple of r (default 9r,
// leaving a relative Gaussian tail below 1e-8 for n <= 3).

namespace parobs {

/// Mass-normalized backward heat kernel; requires t < 0.
inline double heat_kernel_weight(double t, std::span<const double> x) {
    if (!(t < 0.0)) throw std::domain_error("heat_kernel_weight: requires t < 0");
    const int n = static_cast<int>(x.size());
    double x2 = 0.0;
    for (double c : x) x2 += c * c;
    return std::pow(4.0 * M_PI * (-t), -0.5 * n) * std::exp(x2 / (4.0 * t));
}

/// A closed-form field with its spatial gradient, for quadrature paths that
/// are not tied to a grid.
struct AnalyticField {
    int n = 0;
    std::function<double(const Point&)> value;
    std::function<std::vector<double>(const Point&)> gradient;
};

/// chi{w>0} grad w, with nodes landing exactly on {w = 0} weighted one half
/// (the analytic counterpart of the interface-band rule for sampled fields).
inline AnalyticField positive_part(const AnalyticField& w) {
    AnalyticField out;
    out.n = w.n;
    out.value = [w](const Point& p) { return std::max(w.value(p), 0.0); };
    out.gradient = [w](const Point& p) {
        const double v = w.value(p);
        std::vector<double> g = w.gradient(p);
        const double scale = v > 1e-14 ? 1.0 : (std::abs(v) <= 1e-14 ? std::sqrt(0.5) : 0.0);
        for (double& c : g) c *= scale;
        return g;
    };
    return out;
}

inline AnalyticField negative_part(const AnalyticField& w) {
    AnalyticField flipped;
    flipped.n = w.n;
    flipped.value = [w](const Point& p) { return -w.value(p); };
    flipped.gradient = [w](const Point& p) {
        std::vector<double> g = w.gradient(p);
        for (double& c : g) c = -c;
        return g;
    };
    return positive_part(flipped);
}

struct EnergyOptions {
    double truncation_factor = 9.0; // spatial ball radius, in units of r
    int cells_per_octave = 8;       // midpoint cells per dyadic time interval
    int octaves = 40;               // dyadic refinement depth toward t -> 0-
    double spatial_step_factor = 0.25; // analytic path: step = factor * sigma(t)
    bool allow_box_truncation = false; // sampled path: clip the ball to the grid box
};

namespace mono_detail {

// Midpoint time nodes with weights covering (-r^2, 0), dyadically refined.
inline std::vector<std::pair<double, double>> time_nodes(double r, const EnergyOptions& opt) {
    std::vector<std::pair<double, double>> nodes;
    double hi = r * r; // working with tau = -t > 0
    for (int oct = 0; oct < opt.octaves; ++oct) {
        const double lo = hi * 0.5;
        const double len = (hi - lo) / opt.cells_per_octave;
        for (int c = 0; c < opt.cells_per_octave; ++c)
            nodes.emplace_back(lo + (c + 0.5) * len, len);
        hi = lo;
    }
    nodes.emplace_back(hi * 0.5, hi); // final slab down to 0
    return nodes;
}

} // namespace mono_detail

/// I(r, v) for a closed-form field: tensor-product trapezoid in space with a
/// sigma-adaptive step, midpoint-in-time on dyadic subintervals.
inline double weighted_energy(const AnalyticField& v, double r, const EnergyOptions& opt = {}) {
    if (!(r > 0.0)) throw std::invalid_argument("weighted_energy: r must be > 0");
    const int n = v.n;
    const double R = opt.truncation_factor * r;
    double total = 0.0;
    Point p;
    p.x.resize(n);
    for (const auto& [tau, wt] : mono_detail::time_nodes(r, opt)) {
        const double sigma = std::sqrt(2.0 * tau);
        const double reach = std::min(R, 10.0 * sigma);
        const double step = opt.spatial_step_factor * sigma;
        const int M = static_cast<int>(std::ceil(reach / step));
        p.t = -tau;
        double slice = 0.0;
        std::vector<int> j(n, -M);
        const double R2 = R * R;
        while (true) {
            double x2 = 0.0;
            for (int a = 0; a < n; ++a) {
                p.x[a] = j[a] * step;
                x2 += p.x[a] * p.x[a];
            }
            if (x2 <= R2) {
                const std::vector<double> g = v.gradient(p);
                double g2 = 0.0;
                for (double c : g) g2 += c * c;
                if (g2 != 0.0) slice += g2 * heat_kernel_weight(p.t, p.x);
            }
            int a = n - 1;
            while (a >= 0 && ++j[a] > M) {
                j[a] = -M;
                --a;
            }
            if (a < 0) break;
        }
        total += wt * slice * std::pow(step, n);
    }
    return total;
}

/// I(r, v) for the positive part of a sampled field: gradient of max(w,0) by
/// one-sided differences inside the positive set, zero outside, with
/// interface-band nodes weighted one half. Pass negate = true for max(-w,0).
inline double weighted_energy_part(const ScalarField& w, double r, bool negate,
                                   const EnergyOptions& opt = {}) {
    if (!(r > 0.0)) throw std::invalid_argument("weighted_energy: r must be > 0");
    const GridSpec& g = w.grid;
    const int n = g.n;
    if (g.time[0] > -r * r + 1e-12 || g.time[1] < -1e-12)
        throw std::runtime_error("weighted_energy: field does not cover t in (-r^2, 0)");
    double R = opt.truncation_factor * r;
    double avail = kInfiniteDistance;
    for (int a = 0; a < n; ++a)
        avail = std::min(avail, std::min(-g.extent[a][0], g.extent[a][1]) - g.h);
    if (R > avail) {
        if (!opt.allow_box_truncation)
            throw std::runtime_error(
                "weighted_energy: field covers |x| <= " + std::to_string(avail) +
                " but the truncation ball needs |x| <= " + std::to_string(R));
        R = avail;
    }

    // Per-slice squared part-gradients over the truncation ball.
    const double sgn = negate ? -1.0 : 1.0;
    const double R2 = R * R;
    std::vector<std::vector<double>> g2(g.nt(), std::vector<double>(g.slice_size(), 0.0));
    std::vector<int> idx(n);
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            double x2 = 0.0;
            for (int a = 0; a < n; ++a) {
                const double c = g.x_of(a, idx[a]);
                x2 += c * c;
            }
            if (x2 > R2) continue;
            const double v0 = sgn * w.at_flat(k, s);
            if (!(v0 > 0.0)) continue;
            double acc = 0.0;
            bool band = false;
            for (int a = 0; a < n; ++a) {
                const bool has_lo = idx[a] > 0, has_hi = idx[a] + 1 < g.nx(a);
                const double vlo = has_lo ? sgn * w.values[g.flat(k, idx) - g.stride(a)] : 0.0;
                const double vhi = has_hi ? sgn * w.values[g.flat(k, idx) + g.stride(a)] : 0.0;
                const bool lo_in = has_lo && vlo > 0.0, hi_in = has_hi && vhi > 0.0;
                double d = 0.0;
                if (lo_in && hi_in) {
                    d = (vhi - vlo) / (2.0 * g.h);
                } else if (hi_in) {
                    d = (vhi - v0) / g.h;
                    band = true;
                } else if (lo_in) {
                    d = (v0 - vlo) / g.h;
                    band = true;
                } else {
                    band = true;
                }
                acc += d * d;
            }
            g2[k][s] = band ? 0.5 * acc : acc;
        }

    auto slice_integral = [&](double tau) {
        // Linear interpolation between the surrounding slices.
        const double pos = (-tau - g.time[0]) / g.dt;
        const int k0 = std::clamp(static_cast<int>(pos), 0, g.nt() - 2);
        const double a = std::clamp(pos - k0, 0.0, 1.0);
        double acc = 0.0;
        std::vector<int> id(n);
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            const double gg = (1.0 - a) * g2[k0][s] + a * g2[k0 + 1][s];
            if (gg == 0.0) continue;
            g.unflatten_spatial(s, id);
            Point p = g.point(k0, id);
            p.t = -tau;
            acc += gg * heat_kernel_weight(p.t, p.x);
        }
        return acc * std::pow(g.h, n);
    };

    // Dyadic midpoint rule, stopping the refinement once the kernel width
    // falls below the grid resolution; the last slab is frozen there.
    const double tau_min = std::min(2.0 * g.h * g.h, r * r * 0.5);
    double total = 0.0;
    double hi = r * r;
    while (hi > tau_min * (1.0 + 1e-12)) {
        const double lo = std::max(hi * 0.5, tau_min);
        const double len = (hi - lo) / opt.cells_per_octave;
        for (int c = 0; c < opt.cells_per_octave; ++c)
            total += len * slice_integral(lo + (c + 0.5) * len);
        hi = lo;
    }
    total += hi * slice_integral(hi); // frozen final slab
    return total;
}

/// Radii with the energies of both parts and Phi = r^-4 I+ I-.
struct MonotonicityTrace {
    std::vector<double> radii;
    std::vector<double> I_plus;
    std::vector<double> I_minus;
    std::vector<double> phi;
};

namespace mono_detail {

inline void check_radii(std::span<const double> radii) {
    if (radii.empty()) throw std::invalid_argument("phi: empty radius sequence");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw std::invalid_argument("phi: radii must be > 0");
        if (i > 0 && !(radii[i] > radii[i - 1]))
            throw std::invalid_argument("phi: radii must be increasing");
    }
}

template <class EnergyFn>
MonotonicityTrace assemble_trace(std::span<const double> radii, EnergyFn&& energy) {
    MonotonicityTrace tr;
    for (double r : radii) {
        const auto [ip, im] = energy(r);
        tr.radii.push_back(r);
        tr.I_plus.push_back(ip);
        tr.I_minus.push_back(im);
        tr.phi.push_back(ip * im / (r * r * r * r));
    }
    return tr;
}

} // namespace mono_detail

inline MonotonicityTrace phi(const AnalyticField& w, std::span<const double> radii,
                             const EnergyOptions& opt = {}) {
    mono_detail::check_radii(radii);
    const AnalyticField wp = positive_part(w), wm = negative_part(w);
    return mono_detail::assemble_trace(radii, [&](double r) {
        return std::pair{weighted_energy(wp, r, opt), weighted_energy(wm, r, opt)};
    });
}

inline MonotonicityTrace phi(const ScalarField& w, std::span<const double> radii,
                             const EnergyOptions& opt = {}) {
    mono_detail::check_radii(radii);
    return mono_detail::assemble_trace(radii, [&](double r) {
        return std::pair{weighted_energy_part(w, r, false, opt),
                         weighted_energy_part(w, r, true, opt)};
    });
}

struct MonotonicityReport {
    bool monotone = true;
    std::vector<std::size_t> violations;     // k with phi[k+1] < phi[k] - tol
    std::vector<std::size_t> constant_pairs; // k with |phi[k+1] - phi[k]| <= tol
    double worst_drop = 0.0;
};

inline MonotonicityReport check_monotone(const MonotonicityTrace& tr, double tol) {
    MonotonicityReport rep;
    for (std::size_t k = 0; k + 1 < tr.phi.size(); ++k) {
        const double d = tr.phi[k + 1] - tr.phi[k];
        if (d < -tol) {
            rep.monotone = false;
            rep.violations.push_back(k);
            rep.worst_drop = std::max(rep.worst_drop, -d);
        }
        if (std::abs(d) <= tol) rep.constant_pairs.push_back(k);
    }
    return rep;
}

inline std::string trace_to_csv(const MonotonicityTrace& tr) {
    std::ostringstream out;
    out.precision(17);
    out << "r,I_plus,I_minus,phi\n";
    for (std::size_t k = 0; k < tr.radii.size(); ++k)
        out << tr.radii[k] << ',' << tr.I_plus[k] << ',' << tr.I_minus[k] << ',' << tr.phi[k]
            << '\n';
    return out.str();
}

} // namespace parobs

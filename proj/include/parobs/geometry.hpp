#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Space-time grids, parabolic cylinders, parabolic distance and finite
// differences on sampled fields. Time is the slow axis everywhere: a field
// value lives at (t_k, x_{i1..in}) and flat storage is row-major in time,
// then x1, ..., xn (xn fastest).

namespace parobs {

/// A space-time point (t, x) with x in R^n.
struct Point {
    double t = 0.0;
    std::vector<double> x;

    Point() = default;
    Point(double t_, std::vector<double> x_) : t(t_), x(std::move(x_)) {}

    int dim() const { return static_cast<int>(x.size()); }
};

inline Point make_point(double t, std::initializer_list<double> xs) {
    return Point(t, std::vector<double>(xs));
}

/// Parabolic distance sqrt(|x_a - x_b|^2 + |t_a - t_b|).
inline double pardist(const Point& a, const Point& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("pardist: dimension mismatch ("
                                    + std::to_string(a.dim()) + " vs "
                                    + std::to_string(b.dim()) + ")");
    double s = std::abs(a.t - b.t);
    for (int i = 0; i < a.dim(); ++i) {
        const double d = a.x[i] - b.x[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Sentinel for the distance to an empty set; keeps one-phase fields
/// (empty {u<0}) representable without exceptions.
inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

/// min over s in S of pardist(a, s); +infinity for empty S.
inline double pardist_to_set(const Point& a, std::span<const Point> set) {
    double best = kInfiniteDistance;
    for (const Point& p : set) best = std::min(best, pardist(a, p));
    return best;
}

enum class CylinderVariant { full, negative, positive };

/// Parabolic cylinder Q_r(t0,x0) = (t0-r^2, t0+r^2) x B_r(x0), or its
/// negative (past) / positive (future) half.
struct CylinderSpec {
    Point center;
    double radius = 1.0;
    CylinderVariant variant = CylinderVariant::full;

    CylinderSpec() = default;
    CylinderSpec(Point c, double r, CylinderVariant v = CylinderVariant::full)
        : center(std::move(c)), radius(r), variant(v) {
        if (!(radius > 0.0)) throw std::invalid_argument("CylinderSpec: radius must be > 0");
    }

    double t_begin() const {
        return variant == CylinderVariant::positive ? center.t : center.t - radius * radius;
    }
    double t_end() const {
        return variant == CylinderVariant::negative ? center.t : center.t + radius * radius;
    }

    double spatial_dist(const Point& p) const {
        if (p.dim() != center.dim())
            throw std::invalid_argument("CylinderSpec: dimension mismatch");
        double s = 0.0;
        for (int i = 0; i < p.dim(); ++i) {
            const double d = p.x[i] - center.x[i];
            s += d * d;
        }
        return std::sqrt(s);
    }

    /// Strict interior membership: open time interval, open ball.
    bool contains(const Point& p) const {
        return p.t > t_begin() && p.t < t_end() && spatial_dist(p) < radius;
    }

    /// Parabolic boundary: lateral shell over the time span plus the closed
    /// bottom disk; the bottom corner circle belongs to the boundary.
    bool on_parabolic_boundary(const Point& p) const {
        const double d = spatial_dist(p);
        if (p.t == t_begin() && d <= radius) return true;
        return d == radius && p.t >= t_begin() && p.t < t_end();
    }

    CylinderSpec with_variant(CylinderVariant v) const { return CylinderSpec(center, radius, v); }
    CylinderSpec negative_part() const { return with_variant(CylinderVariant::negative); }
    CylinderSpec positive_part() const { return with_variant(CylinderVariant::positive); }
    CylinderSpec scaled(double factor) const { return CylinderSpec(center, radius * factor, variant); }
};

namespace detail {
inline int tiled_count(double length, double step, const char* what) {
    const double raw = length / step;
    const int cells = static_cast<int>(std::llround(raw));
    if (cells < 1 || std::abs(raw - cells) > 1e-9 * std::max(1.0, raw))
        throw std::invalid_argument(std::string("GridSpec: ") + what
                                    + " extent is not an integer multiple of the step");
    return cells + 1;
}
} // namespace detail

/// Uniform tensor-product space-time grid. The spatial step h is shared by
/// all axes; extents must tile exactly.
struct GridSpec {
    int n = 0;                                       // spatial dimension
    std::vector<std::array<double, 2>> extent;       // [lo, hi] per axis
    double h = 0.0;                                  // spatial step
    std::array<double, 2> time{0.0, 1.0};            // [t0, t1]
    double dt = 0.0;                                 // time step

    GridSpec() = default;
    GridSpec(std::vector<std::array<double, 2>> extent_, double h_,
             std::array<double, 2> time_, double dt_)
        : n(static_cast<int>(extent_.size())), extent(std::move(extent_)), h(h_),
          time(time_), dt(dt_) {
        if (n < 1) throw std::invalid_argument("GridSpec: need n >= 1");
        if (!(h > 0.0) || !(dt > 0.0)) throw std::invalid_argument("GridSpec: steps must be > 0");
        nx_.resize(n);
        for (int a = 0; a < n; ++a) {
            if (!(extent[a][1] > extent[a][0]))
                throw std::invalid_argument("GridSpec: empty spatial extent");
            nx_[a] = detail::tiled_count(extent[a][1] - extent[a][0], h, "spatial");
        }
        if (!(time[1] > time[0])) throw std::invalid_argument("GridSpec: empty time interval");
        nt_ = detail::tiled_count(time[1] - time[0], dt, "time");
        strides_.assign(n, 1);
        for (int a = n - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * nx_[a + 1];
        slice_size_ = strides_.empty() ? 1 : strides_[0] * nx_[0];
    }

    int nx(int axis) const { return nx_[axis]; }
    int nt() const { return nt_; }
    std::size_t slice_size() const { return static_cast<std::size_t>(slice_size_); }
    std::size_t node_count() const { return slice_size() * static_cast<std::size_t>(nt_); }

    double t_of(int k) const { return time[0] + k * dt; }
    double x_of(int axis, int i) const { return extent[axis][0] + i * h; }

    std::size_t spatial_flat(std::span<const int> idx) const {
        std::size_t f = 0;
        for (int a = 0; a < n; ++a) f += static_cast<std::size_t>(idx[a]) * strides_[a];
        return f;
    }
    std::size_t flat(int k, std::span<const int> idx) const {
        return static_cast<std::size_t>(k) * slice_size() + spatial_flat(idx);
    }
    std::size_t stride(int axis) const { return strides_[axis]; }

    void unflatten_spatial(std::size_t f, std::span<int> idx) const {
        for (int a = 0; a < n; ++a) {
            idx[a] = static_cast<int>(f / strides_[a]);
            f %= strides_[a];
        }
    }

    Point point(int k, std::span<const int> idx) const {
        Point p;
        p.t = t_of(k);
        p.x.resize(n);
        for (int a = 0; a < n; ++a) p.x[a] = x_of(a, idx[a]);
        return p;
    }
    Point point_flat(int k, std::size_t f) const {
        Point p;
        p.t = t_of(k);
        p.x.resize(n);
        for (int a = 0; a < n; ++a) {
            p.x[a] = x_of(a, static_cast<int>(f / strides_[a]));
            f %= strides_[a];
        }
        return p;
    }

    /// Nearest grid node (k, flat spatial index) to a point; coordinates are
    /// clamped into the grid box first.
    std::pair<int, std::size_t> nearest_node(const Point& p) const {
        int k = static_cast<int>(std::llround((p.t - time[0]) / dt));
        k = std::clamp(k, 0, nt_ - 1);
        std::size_t f = 0;
        for (int a = 0; a < n; ++a) {
            int i = static_cast<int>(std::llround((p.x[a] - extent[a][0]) / h));
            i = std::clamp(i, 0, nx_[a] - 1);
            f += static_cast<std::size_t>(i) * strides_[a];
        }
        return {k, f};
    }

    bool same_layout(const GridSpec& o) const {
        return n == o.n && nx_ == o.nx_ && nt_ == o.nt_;
    }

  private:
    std::vector<int> nx_;
    int nt_ = 0;
    std::vector<std::size_t> strides_;
    std::size_t slice_size_ = 1;
};

/// Samples of a function of (t, x) on a uniform grid, one scalar per node,
/// finite after construction.
struct ScalarField {
    GridSpec grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(GridSpec g, double fill = 0.0)
        : grid(std::move(g)), values(grid.node_count(), fill) {}
    ScalarField(GridSpec g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.node_count())
            throw std::invalid_argument("ScalarField: value count does not match grid");
        require_finite();
    }

    double& at(int k, std::span<const int> idx) { return values[grid.flat(k, idx)]; }
    double at(int k, std::span<const int> idx) const { return values[grid.flat(k, idx)]; }
    double& at_flat(int k, std::size_t f) { return values[k * grid.slice_size() + f]; }
    double at_flat(int k, std::size_t f) const { return values[k * grid.slice_size() + f]; }

    std::span<double> slice(int k) {
        return std::span<double>(values).subspan(k * grid.slice_size(), grid.slice_size());
    }
    std::span<const double> slice(int k) const {
        return std::span<const double>(values).subspan(k * grid.slice_size(), grid.slice_size());
    }

    void require_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("ScalarField: non-finite value");
    }

    /// Multilinear interpolation in (t, x); p must lie inside the grid box
    /// up to a small snap tolerance.
    double interpolate(const Point& p) const {
        const int n = grid.n;
        const double eps = 1e-9;
        double tau = (p.t - grid.time[0]) / grid.dt;
        if (tau < -eps || tau > grid.nt() - 1 + eps)
            throw std::out_of_range("ScalarField::interpolate: t outside grid");
        tau = std::clamp(tau, 0.0, static_cast<double>(grid.nt() - 1));
        int k0 = std::min(static_cast<int>(tau), grid.nt() - 2);
        if (grid.nt() == 1) k0 = 0;
        const double wt = grid.nt() == 1 ? 0.0 : tau - k0;

        std::vector<int> i0(n);
        std::vector<double> wx(n);
        for (int a = 0; a < n; ++a) {
            double s = (p.x[a] - grid.extent[a][0]) / grid.h;
            if (s < -eps || s > grid.nx(a) - 1 + eps)
                throw std::out_of_range("ScalarField::interpolate: x outside grid");
            s = std::clamp(s, 0.0, static_cast<double>(grid.nx(a) - 1));
            i0[a] = std::min(static_cast<int>(s), grid.nx(a) - 2);
            if (grid.nx(a) == 1) i0[a] = 0;
            wx[a] = grid.nx(a) == 1 ? 0.0 : s - i0[a];
        }

        // Accumulate over the 2^(n+1) cell corners.
        double acc = 0.0;
        std::vector<int> idx(n);
        const int corners = 1 << n;
        for (int kc = 0; kc < (grid.nt() == 1 ? 1 : 2); ++kc) {
            const double wk = kc ? wt : (grid.nt() == 1 ? 1.0 : 1.0 - wt);
            if (wk == 0.0) continue;
            for (int c = 0; c < corners; ++c) {
                double w = wk;
                for (int a = 0; a < n; ++a) {
                    const bool hi = (c >> a) & 1;
                    w *= hi ? wx[a] : 1.0 - wx[a];
                    idx[a] = i0[a] + (hi ? 1 : 0);
                    if (grid.nx(a) == 1) idx[a] = 0;
                }
                if (w != 0.0) acc += w * at(k0 + kc, idx);
            }
        }
        return acc;
    }
};

/// Sample a callable f(Point) -> double onto a grid.
template <class F>
ScalarField sample(const GridSpec& grid, F&& f) {
    ScalarField u(grid);
    std::vector<int> idx(grid.n);
    for (int k = 0; k < grid.nt(); ++k)
        for (std::size_t s = 0; s < grid.slice_size(); ++s) {
            grid.unflatten_spatial(s, idx);
            u.at_flat(k, s) = f(grid.point(k, idx));
        }
    u.require_finite();
    return u;
}

// ---- finite differences ----------------------------------------------------
// Second-order central differences in space, first-order backward difference
// in time (matching the implicit stepping direction); one-sided stencils at
// edges. Quadratic-in-space / linear-in-time fields are differentiated
// exactly at interior nodes.

inline bool is_spatial_interior(const GridSpec& g, std::span<const int> idx) {
    for (int a = 0; a < g.n; ++a)
        if (idx[a] == 0 || idx[a] == g.nx(a) - 1) return false;
    return true;
}

inline bool is_time_interior(const GridSpec&, int k) { return k >= 1; }

inline double partial_x(const ScalarField& u, int k, std::span<const int> idx, int axis) {
    const GridSpec& g = u.grid;
    if (g.nx(axis) < 2) throw std::invalid_argument("partial_x: grid too small for stencil");
    const std::size_t f = g.flat(k, idx);
    const std::size_t s = g.stride(axis);
    const int i = idx[axis];
    if (i > 0 && i < g.nx(axis) - 1)
        return (u.values[f + s] - u.values[f - s]) / (2.0 * g.h);
    if (i == 0) return (u.values[f + s] - u.values[f]) / g.h;        // one-sided
    return (u.values[f] - u.values[f - s]) / g.h;                    // one-sided
}

inline std::vector<double> gradient(const ScalarField& u, int k, std::span<const int> idx) {
    std::vector<double> grad(u.grid.n);
    for (int a = 0; a < u.grid.n; ++a) grad[a] = partial_x(u, k, idx, a);
    return grad;
}

inline double gradient_norm(const ScalarField& u, int k, std::span<const int> idx) {
    double s = 0.0;
    for (int a = 0; a < u.grid.n; ++a) {
        const double d = partial_x(u, k, idx, a);
        s += d * d;
    }
    return std::sqrt(s);
}

inline double time_derivative(const ScalarField& u, int k, std::span<const int> idx) {
    const GridSpec& g = u.grid;
    if (g.nt() < 2) throw std::invalid_argument("time_derivative: fewer than 2 time slices");
    const std::size_t f = g.spatial_flat(idx);
    if (k >= 1) return (u.at_flat(k, f) - u.at_flat(k - 1, f)) / g.dt;
    return (u.at_flat(1, f) - u.at_flat(0, f)) / g.dt;               // one-sided at k = 0
}

inline double laplacian(const ScalarField& u, int k, std::span<const int> idx) {
    const GridSpec& g = u.grid;
    const std::size_t f = g.flat(k, idx);
    double acc = 0.0;
    for (int a = 0; a < g.n; ++a) {
        if (g.nx(a) < 3) throw std::invalid_argument("laplacian: grid too small for stencil");
        const int i = idx[a];
        if (i == 0 || i == g.nx(a) - 1)
            throw std::invalid_argument("laplacian: node on spatial edge");
        const std::size_t s = g.stride(a);
        acc += u.values[f + s] - 2.0 * u.values[f] + u.values[f - s];
    }
    return acc / (g.h * g.h);
}

/// Directional derivative grad(u) . e by central differences.
inline double directional_derivative(const ScalarField& u, int k, std::span<const int> idx,
                                     std::span<const double> e) {
    double s = 0.0;
    for (int a = 0; a < u.grid.n; ++a)
        if (e[a] != 0.0) s += e[a] * partial_x(u, k, idx, a);
    return s;
}

namespace detail {

template <class Fn>
void visit_cylinder_nodes(const GridSpec& g, const CylinderSpec& Q, bool closed, Fn&& fn) {
    const double eps = 1e-12;
    const int k_lo = std::max(0, static_cast<int>(std::ceil((Q.t_begin() - g.time[0]) / g.dt - 1e-9)));
    const int k_hi = std::min(g.nt() - 1,
                              static_cast<int>(std::floor((Q.t_end() - g.time[0]) / g.dt + 1e-9)));
    std::vector<int> lo(g.n), hi(g.n), idx(g.n);
    for (int a = 0; a < g.n; ++a) {
        lo[a] = std::max(0, static_cast<int>(
                                std::ceil((Q.center.x[a] - Q.radius - g.extent[a][0]) / g.h - 1e-9)));
        hi[a] = std::min(g.nx(a) - 1,
                         static_cast<int>(std::floor(
                             (Q.center.x[a] + Q.radius - g.extent[a][0]) / g.h + 1e-9)));
        if (lo[a] > hi[a]) return;
    }
    const double r2 = Q.radius * Q.radius;
    for (int k = k_lo; k <= k_hi; ++k) {
        const double t = g.t_of(k);
        const bool t_in = closed ? (t >= Q.t_begin() - eps && t <= Q.t_end() + eps)
                                 : (t > Q.t_begin() && t < Q.t_end());
        if (!t_in) continue;
        idx = lo;
        while (true) {
            double d2 = 0.0;
            for (int a = 0; a < g.n; ++a) {
                const double d = g.x_of(a, idx[a]) - Q.center.x[a];
                d2 += d * d;
            }
            if (closed ? d2 <= r2 * (1.0 + 1e-12) + eps : d2 < r2)
                fn(k, std::span<const int>(idx));
            int a = g.n - 1;
            while (a >= 0 && ++idx[a] > hi[a]) {
                idx[a] = lo[a];
                --a;
            }
            if (a < 0) break;
        }
    }
}

} // namespace detail

/// Visit every grid node (k, idx) whose point lies strictly inside Q.
/// Iterates only the cylinder's bounding box.
template <class Fn>
void for_each_node_in(const GridSpec& g, const CylinderSpec& Q, Fn&& fn) {
    detail::visit_cylinder_nodes(g, Q, false, std::forward<Fn>(fn));
}

/// Visit every grid node in the closure of Q. Suprema and infima are sampled
/// over closures so that shallow past cylinders (height comparable to dt)
/// still hold nodes.
template <class Fn>
void for_each_node_in_closure(const GridSpec& g, const CylinderSpec& Q, Fn&& fn) {
    detail::visit_cylinder_nodes(g, Q, true, std::forward<Fn>(fn));
}

/// True if the closed cylinder box fits inside the grid's space-time box.
inline bool cylinder_in_domain(const GridSpec& g, const CylinderSpec& Q) {
    if (Q.t_begin() < g.time[0] - 1e-12 || Q.t_end() > g.time[1] + 1e-12) return false;
    for (int a = 0; a < g.n; ++a) {
        if (Q.center.x[a] - Q.radius < g.extent[a][0] - 1e-12) return false;
        if (Q.center.x[a] + Q.radius > g.extent[a][1] + 1e-12) return false;
    }
    return true;
}

} // namespace parobs

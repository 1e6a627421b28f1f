#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "parobs/geometry.hpp"

// Free-boundary machinery: crossing extraction along grid lines, branch-point
// detection, graph fitting x1 = f(t, x') in a given spatial direction,
// Lipschitz-norm and normal-continuity measurement, and odd reflection.

namespace parobs {

enum class Phase { positive, negative };

namespace fb_detail {

inline bool in_phase(double v, Phase phase, double deadband) {
    return phase == Phase::positive ? v > deadband : v < -deadband;
}

// Deduplication within pardist h/2 via a spatial hash on quantized keys.
class Dedup {
  public:
    Dedup(int n, double radius) : n_(n), radius_(radius) {}

    bool insert(const Point& p) {
        std::vector<long> key(n_ + 1);
        key[0] = static_cast<long>(std::floor(p.t / (radius_ * radius_)));
        for (int a = 0; a < n_; ++a)
            key[a + 1] = static_cast<long>(std::floor(p.x[a] / radius_));
        // probe neighboring buckets
        std::vector<long> probe(key);
        if (hit(p, probe, 0)) return false;
        buckets_[key].push_back(p);
        return true;
    }

  private:
    bool hit(const Point& p, std::vector<long>& probe, int axis) {
        if (axis == n_ + 1) {
            const auto it = buckets_.find(probe);
            if (it == buckets_.end()) return false;
            for (const Point& q : it->second)
                if (pardist(p, q) < radius_) return true;
            return false;
        }
        const long base = probe[axis];
        for (long d = -1; d <= 1; ++d) {
            probe[axis] = base + d;
            if (hit(p, probe, axis + 1)) {
                probe[axis] = base;
                return true;
            }
        }
        probe[axis] = base;
        return false;
    }

    int n_;
    double radius_;
    std::map<std::vector<long>, std::vector<Point>> buckets_;
};

} // namespace fb_detail

/// Linear-interpolation crossings of the phase boundary along every grid
/// edge (spatial and temporal), deduplicated within pardist h/2. The point
/// order is deterministic: lexicographic in (t, space, axis).
inline std::vector<Point> extract_free_boundary(const ScalarField& u, Phase phase,
                                                double deadband = 1e-12) {
    const GridSpec& g = u.grid;
    std::vector<Point> cloud;
    fb_detail::Dedup dedup(g.n, g.h / 2.0);
    std::vector<int> idx(g.n);

    auto try_emit = [&](const Point& p) {
        if (dedup.insert(p)) cloud.push_back(p);
    };
    auto crossing = [&](double v0, double v1) {
        // zero of the linear interpolant, from the first endpoint
        return v0 / (v0 - v1);
    };

    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            const double v0 = u.at_flat(k, s);
            const bool in0 = fb_detail::in_phase(v0, phase, deadband);
            for (int a = 0; a < g.n; ++a) {
                if (idx[a] + 1 >= g.nx(a)) continue;
                const double v1 = u.values[g.flat(k, idx) + g.stride(a)];
                if (in0 == fb_detail::in_phase(v1, phase, deadband)) continue;
                Point p = g.point(k, idx);
                p.x[a] += crossing(v0, v1) * g.h;
                try_emit(p);
            }
            if (k + 1 < g.nt()) {
                const double v1 = u.at_flat(k + 1, s);
                if (in0 != fb_detail::in_phase(v1, phase, deadband)) {
                    Point p = g.point(k, idx);
                    p.t += crossing(v0, v1) * g.dt;
                    try_emit(p);
                }
            }
        }
    return cloud;
}

/// Brute-force parabolic Hausdorff distance between point clouds.
inline double hausdorff_distance(std::span<const Point> a, std::span<const Point> b) {
    if (a.empty() || b.empty()) return a.empty() && b.empty() ? 0.0 : kInfiniteDistance;
    double worst = 0.0;
    for (const Point& p : a) worst = std::max(worst, pardist_to_set(p, b));
    for (const Point& q : b) worst = std::max(worst, pardist_to_set(q, a));
    return worst;
}

/// Grid nodes in the window satisfying all four branch-point clauses:
/// u = 0 (within the deadband), |grad u| <= sigma, and parabolic distance at
/// most sigma to both phase sets.
struct BranchPointReport {
    double sigma = 0.0;
    struct Hit {
        Point point;
        double grad_norm;
        double dist_positive;
        double dist_negative;
    };
    std::vector<Hit> hits;
};

inline BranchPointReport detect_branch_points(const ScalarField& u, double sigma,
                                              const CylinderSpec& window,
                                              double deadband = 1e-12) {
    if (!(sigma > 0.0)) throw std::invalid_argument("detect_branch_points: sigma must be > 0");
    const GridSpec& g = u.grid;
    if (!cylinder_in_domain(g, window))
        throw std::invalid_argument("detect_branch_points: window outside grid");

    // Local search for the nearest phase node within the sigma box.
    auto phase_dist = [&](int k, std::span<const int> idx, Phase phase) {
        const Point p0 = g.point(k, idx);
        const int kr = static_cast<int>(std::ceil(sigma * sigma / g.dt));
        const int xr = static_cast<int>(std::ceil(sigma / g.h));
        double best = kInfiniteDistance;
        std::vector<int> j(g.n);
        std::vector<int> lo(g.n), hi(g.n);
        for (int a = 0; a < g.n; ++a) {
            lo[a] = std::max(0, idx[a] - xr);
            hi[a] = std::min(g.nx(a) - 1, idx[a] + xr);
            j[a] = lo[a];
        }
        for (int kk = std::max(0, k - kr); kk <= std::min(g.nt() - 1, k + kr); ++kk) {
            for (int a = 0; a < g.n; ++a) j[a] = lo[a];
            while (true) {
                if (fb_detail::in_phase(u.at(kk, j), phase, deadband))
                    best = std::min(best, pardist(p0, g.point(kk, j)));
                int a = g.n - 1;
                while (a >= 0 && ++j[a] > hi[a]) {
                    j[a] = lo[a];
                    --a;
                }
                if (a < 0) break;
            }
        }
        return best;
    };

    BranchPointReport rep;
    rep.sigma = sigma;
    std::vector<int> idx(g.n);
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (!window.contains(g.point(k, idx))) continue;
            if (std::abs(u.at_flat(k, s)) > deadband) continue;
            if (!is_spatial_interior(g, idx)) continue;
            const double gn = gradient_norm(u, k, idx);
            if (gn > sigma) continue;
            const double dp = phase_dist(k, idx, Phase::positive);
            if (dp > sigma) continue;
            const double dn = phase_dist(k, idx, Phase::negative);
            if (dn > sigma) continue;
            rep.hits.push_back({g.point(k, idx), gn, dp, dn});
        }
    return rep;
}

/// Per-time-slice graph samples x1 = f(t, x') of a phase boundary in a given
/// spatial direction, with optional fitted spatial normals.
struct FreeBoundaryGraph {
    Phase phase = Phase::positive;
    std::vector<double> direction; // unit vector nu in ambient coordinates
    int n = 0;                     // ambient spatial dimension
    double h = 0.0, dt = 0.0;      // binning cell sizes

    struct Sample {
        long tcell = 0;
        std::vector<long> xcell; // n-1 entries
        double t = 0.0;
        std::vector<double> xp;  // n-1 rotated tangential coordinates
        double f = 0.0;          // offset along the direction
        std::optional<std::vector<double>> normal; // ambient spatial unit normal
    };
    std::vector<Sample> samples;

    std::size_t violations = 0; // cells rejected as non-graph
};

namespace fb_detail {

/// Deterministic orthonormal basis with the given unit vector first.
inline std::vector<std::vector<double>> orthonormal_basis(std::vector<double> nu) {
    const int n = static_cast<int>(nu.size());
    double norm = 0.0;
    for (double c : nu) norm += c * c;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw std::invalid_argument("fit_graph: zero direction");
    for (double& c : nu) c /= norm;
    std::vector<std::vector<double>> basis{nu};
    for (int j = 0; j < n && static_cast<int>(basis.size()) < n; ++j) {
        std::vector<double> v(n, 0.0);
        v[j] = 1.0;
        for (const auto& b : basis) {
            double d = 0.0;
            for (int a = 0; a < n; ++a) d += v[a] * b[a];
            for (int a = 0; a < n; ++a) v[a] -= d * b[a];
        }
        double vn = 0.0;
        for (double c : v) vn += c * c;
        vn = std::sqrt(vn);
        if (vn > 1e-8) {
            for (double& c : v) c /= vn;
            basis.push_back(std::move(v));
        }
    }
    if (static_cast<int>(basis.size()) != n)
        throw std::logic_error("fit_graph: basis construction failed");
    return basis;
}

} // namespace fb_detail

/// Bins window points by (t, x') cell. Cells whose crossings spread more than
/// 2h along the direction are graph violations; more than 10% violated cells
/// is an error.
inline FreeBoundaryGraph fit_graph(std::span<const Point> cloud,
                                   std::vector<double> direction, const CylinderSpec& window,
                                   double h, double dt, Phase phase = Phase::positive) {
    const int n = static_cast<int>(direction.size());
    const auto basis = fb_detail::orthonormal_basis(direction);

    struct Cell {
        std::vector<double> offsets;
        std::vector<double> t_sum;
        std::vector<std::vector<double>> xp;
    };
    std::map<std::pair<long, std::vector<long>>, Cell> cells;

    std::size_t used = 0;
    for (const Point& p : cloud) {
        if (!window.contains(p) && !window.on_parabolic_boundary(p)) continue;
        ++used;
        double off = 0.0;
        std::vector<double> xp(n - 1);
        for (int a = 0; a < n; ++a) off += (p.x[a] - window.center.x[a]) * basis[0][a];
        for (int j = 1; j < n; ++j) {
            double c = 0.0;
            for (int a = 0; a < n; ++a) c += (p.x[a] - window.center.x[a]) * basis[j][a];
            xp[j - 1] = c;
        }
        const long tcell = static_cast<long>(std::llround((p.t - window.center.t) / dt));
        std::vector<long> xcell(n - 1);
        for (int j = 0; j + 1 < n; ++j) xcell[j] = static_cast<long>(std::llround(xp[j] / h));
        Cell& cell = cells[{tcell, xcell}];
        cell.offsets.push_back(off);
        cell.t_sum.push_back(p.t);
        cell.xp.push_back(xp);
    }
    if (used == 0) throw std::invalid_argument("fit_graph: no cloud points in window");

    FreeBoundaryGraph graph;
    graph.phase = phase;
    graph.direction = basis[0];
    graph.n = n;
    graph.h = h;
    graph.dt = dt;

    for (const auto& [key, cell] : cells) {
        double lo = cell.offsets[0], hi = cell.offsets[0];
        for (double o : cell.offsets) {
            lo = std::min(lo, o);
            hi = std::max(hi, o);
        }
        if (hi - lo > 2.0 * h) {
            ++graph.violations;
            continue;
        }
        FreeBoundaryGraph::Sample s;
        s.tcell = key.first;
        s.xcell = key.second;
        const double m = static_cast<double>(cell.offsets.size());
        for (double o : cell.offsets) s.f += o / m;
        for (double t : cell.t_sum) s.t += t / m;
        s.xp.assign(n - 1, 0.0);
        for (const auto& xp : cell.xp)
            for (int j = 0; j + 1 < n; ++j) s.xp[j] += xp[j] / m;
        graph.samples.push_back(std::move(s));
    }
    if (10 * graph.violations > cells.size())
        throw std::runtime_error("fit_graph: not a graph in this direction");
    return graph;
}

/// (spatial, temporal) Lipschitz quotients of the fitted graph: spatial over
/// same-time sample pairs, temporal over same-x' pairs (plain |dt|, the graph
/// is measured as a function).
inline std::pair<double, double> lipschitz_norms(const FreeBoundaryGraph& graph) {
    if (graph.samples.size() < 2)
        throw std::invalid_argument("lipschitz_norms: need at least 2 samples");
    double spatial = 0.0, temporal = 0.0;
    const auto& S = graph.samples;
    for (std::size_t i = 0; i < S.size(); ++i)
        for (std::size_t j = i + 1; j < S.size(); ++j) {
            const double df = std::abs(S[i].f - S[j].f);
            if (S[i].tcell == S[j].tcell) {
                double dx2 = 0.0;
                for (std::size_t a = 0; a < S[i].xp.size(); ++a) {
                    const double d = S[i].xp[a] - S[j].xp[a];
                    dx2 += d * d;
                }
                if (dx2 > 1e-24) spatial = std::max(spatial, df / std::sqrt(dx2));
            }
            if (S[i].xcell == S[j].xcell) {
                const double dtv = std::abs(S[i].t - S[j].t);
                if (dtv > 1e-12) temporal = std::max(temporal, df / dtv);
            }
        }
    return {spatial, temporal};
}

/// Ambient parabolic distance between two graph samples.
inline double sample_pardist(const FreeBoundaryGraph&, const FreeBoundaryGraph::Sample& a,
                             const FreeBoundaryGraph::Sample& b) {
    double s = std::abs(a.t - b.t);
    const double dfo = a.f - b.f;
    s += dfo * dfo;
    for (std::size_t j = 0; j < a.xp.size(); ++j) {
        const double d = a.xp[j] - b.xp[j];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Fits per-sample spatial normals by local least squares over parabolic
/// neighborhoods of radius 4h (time neighbors stabilize the fit but time is
/// not a regressor). Samples with fewer than n neighbors are skipped.
inline std::size_t fit_normals(FreeBoundaryGraph& graph, double radius_factor = 4.0) {
    const int n = graph.n;
    const int m = n; // unknowns: intercept + (n-1) slopes
    const double radius = radius_factor * graph.h;
    std::size_t skipped = 0;

    for (auto& s : graph.samples) {
        std::vector<const FreeBoundaryGraph::Sample*> nb;
        for (const auto& q : graph.samples)
            if (&q != &s && sample_pardist(graph, s, q) <= radius) nb.push_back(&q);
        if (static_cast<int>(nb.size()) < n) {
            ++skipped;
            continue;
        }
        // normal equations for f ~ c + g . (x' - s.x')
        std::vector<double> A(m * m, 0.0), rhs(m, 0.0);
        auto accumulate = [&](const FreeBoundaryGraph::Sample& q) {
            std::vector<double> row(m, 0.0);
            row[0] = 1.0;
            for (int j = 0; j + 1 < n; ++j) row[j + 1] = q.xp[j] - s.xp[j];
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < m; ++j) A[i * m + j] += row[i] * row[j];
                rhs[i] += row[i] * q.f;
            }
        };
        accumulate(s);
        for (const auto* q : nb) accumulate(*q);
        // small dense Cholesky-free Gaussian elimination
        bool ok = true;
        for (int c = 0; c < m && ok; ++c) {
            int piv = c;
            for (int rr = c + 1; rr < m; ++rr)
                if (std::abs(A[rr * m + c]) > std::abs(A[piv * m + c])) piv = rr;
            if (std::abs(A[piv * m + c]) < 1e-14) {
                ok = false;
                break;
            }
            if (piv != c) {
                for (int j = 0; j < m; ++j) std::swap(A[c * m + j], A[piv * m + j]);
                std::swap(rhs[c], rhs[piv]);
            }
            for (int rr = c + 1; rr < m; ++rr) {
                const double fac = A[rr * m + c] / A[c * m + c];
                for (int j = c; j < m; ++j) A[rr * m + j] -= fac * A[c * m + j];
                rhs[rr] -= fac * rhs[c];
            }
        }
        if (!ok) {
            ++skipped;
            continue;
        }
        std::vector<double> sol(m);
        for (int i = m - 1; i >= 0; --i) {
            double acc = rhs[i];
            for (int j = i + 1; j < m; ++j) acc -= A[i * m + j] * sol[j];
            sol[i] = acc / A[i * m + i];
        }
        // normal in the rotated frame: (1, -grad) normalized, then back to ambient
        std::vector<double> rot(n);
        rot[0] = 1.0;
        double norm = 1.0;
        for (int j = 0; j + 1 < n; ++j) {
            rot[j + 1] = -sol[j + 1];
            norm += sol[j + 1] * sol[j + 1];
        }
        norm = std::sqrt(norm);
        const auto basis = fb_detail::orthonormal_basis(graph.direction);
        std::vector<double> amb(n, 0.0);
        for (int j = 0; j < n; ++j)
            for (int a = 0; a < n; ++a) amb[a] += rot[j] / norm * basis[j][a];
        s.normal = std::move(amb);
    }
    return skipped;
}

/// Cumulative table delta -> max |nu(p) - nu(q)| over sample pairs with
/// pardist <= delta; nondecreasing in delta by construction.
struct ModulusTable {
    std::vector<double> delta;
    std::vector<double> max_gap;
    std::size_t pairs = 0;
    std::size_t skipped_samples = 0;
};

inline ModulusTable normal_continuity(const FreeBoundaryGraph& graph,
                                      std::span<const double> bins) {
    ModulusTable table;
    table.delta.assign(bins.begin(), bins.end());
    table.max_gap.assign(bins.size(), 0.0);
    for (const auto& s : graph.samples)
        if (!s.normal) ++table.skipped_samples;
    const auto& S = graph.samples;
    for (std::size_t i = 0; i < S.size(); ++i) {
        if (!S[i].normal) continue;
        for (std::size_t j = i + 1; j < S.size(); ++j) {
            if (!S[j].normal) continue;
            const double d = sample_pardist(graph, S[i], S[j]);
            double gap2 = 0.0;
            for (std::size_t a = 0; a < S[i].normal->size(); ++a) {
                const double dd = (*S[i].normal)[a] - (*S[j].normal)[a];
                gap2 += dd * dd;
            }
            const double gap = std::sqrt(gap2);
            ++table.pairs;
            for (std::size_t b = 0; b < table.delta.size(); ++b)
                if (d <= table.delta[b]) table.max_gap[b] = std::max(table.max_gap[b], gap);
        }
    }
    return table;
}

/// Odd reflection of a one-phase field on x1 in [0, R] to x1 in [-R, R]:
/// v(t, x1, x') = u for x1 >= 0 and -u(t, -x1, x') for x1 < 0.
inline ScalarField reflect_odd(const ScalarField& u, double deadband = 1e-12) {
    const GridSpec& g = u.grid;
    if (std::abs(g.extent[0][0]) > 1e-12)
        throw std::invalid_argument("reflect_odd: grid must start at x1 = 0");
    std::vector<int> idx(g.n);
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            const double v = u.at_flat(k, s);
            if (v < -deadband)
                throw std::invalid_argument("reflect_odd: field is not one-phase (u >= 0)");
            if (idx[0] == 0 && std::abs(v) > deadband)
                throw std::invalid_argument("reflect_odd: nonzero trace on {x1 = 0}");
        }

    std::vector<std::array<double, 2>> extent = g.extent;
    extent[0] = {-g.extent[0][1], g.extent[0][1]};
    GridSpec gg(extent, g.h, g.time, g.dt);
    ScalarField v(gg, 0.0);
    std::vector<int> src(g.n);
    const int mid = g.nx(0) - 1; // index of x1 = 0 in the output grid
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < gg.slice_size(); ++s) {
            gg.unflatten_spatial(s, idx);
            src = idx;
            double sign = 1.0;
            src[0] = idx[0] - mid;
            if (src[0] < 0) {
                src[0] = -src[0];
                sign = -1.0;
            }
            const double val = u.at(k, src);
            v.at_flat(k, s) = src[0] == 0 ? 0.0 : sign * val;
        }
    return v;
}

// ---- CSV emission ----------------------------------------------------------

inline std::string cloud_to_csv(std::span<const Point> cloud, int n) {
    std::ostringstream out;
    out.precision(17);
    out << "t";
    for (int a = 0; a < n; ++a) out << ",x" << (a + 1);
    out << '\n';
    for (const Point& p : cloud) {
        out << p.t;
        for (int a = 0; a < n; ++a) out << ',' << p.x[a];
        out << '\n';
    }
    return out.str();
}

inline std::string graph_to_csv(const FreeBoundaryGraph& graph) {
    std::ostringstream out;
    out.precision(17);
    out << "t";
    for (int a = 2; a <= graph.n; ++a) out << ",x" << a;
    out << ",f";
    for (int a = 1; a <= graph.n; ++a) out << ",nu_" << a;
    out << '\n';
    for (const auto& s : graph.samples) {
        out << s.t;
        for (double c : s.xp) out << ',' << c;
        out << ',' << s.f;
        for (int a = 0; a < graph.n; ++a) {
            out << ',';
            if (s.normal) out << (*s.normal)[a];
        }
        out << '\n';
    }
    return out.str();
}

inline std::string modulus_to_csv(const ModulusTable& table) {
    std::ostringstream out;
    out.precision(17);
    out << "delta,max_normal_gap\n";
    for (std::size_t i = 0; i < table.delta.size(); ++i)
        out << table.delta[i] << ',' << table.max_gap[i] << '\n';
    return out.str();
}

} // namespace parobs

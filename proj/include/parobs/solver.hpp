#pragma once

#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "parobs/geometry.hpp"
#include "parobs/linear_solver.hpp"

// Discrete solution operator for    laplace(u) - du/dt = lam+ chi{u>0} - lam- chi{u<0}
// on a box with prescribed parabolic-boundary data. Backward Euler stepping;
// the discontinuous right-hand side is handled per step by an active-set
// fixed point: freeze sign sets, solve the linear system, recompute signs,
// stop when the sign sets are unchanged. Nodes whose sign alternates over
// three consecutive iterations are frozen to the zero set for that step.

namespace parobs {

/// The coefficients lam+ and lam- as evaluable fields over (t,x), together
/// with their recorded positive lower bound and Lipschitz bound.
struct CoefficientPair {
    std::function<double(const Point&)> lambda_plus;
    std::function<double(const Point&)> lambda_minus;
    double lambda_min = 0.0;
    double lip_bound = 0.0;

    static CoefficientPair constant(double lp, double lm) {
        if (!(lp > 0.0) || !(lm > 0.0))
            throw std::invalid_argument("CoefficientPair: coefficients must be > 0");
        CoefficientPair c;
        c.lambda_plus = [lp](const Point&) { return lp; };
        c.lambda_minus = [lm](const Point&) { return lm; };
        c.lambda_min = std::min(lp, lm);
        c.lip_bound = 0.0;
        return c;
    }

    /// Checks the recorded bounds against samples on a grid: values at or
    /// above lambda_min, finite-difference Lipschitz quotients at or below
    /// lip_bound (with a small tolerance).
    void validate_on(const GridSpec& g) const {
        const double lip_tol = lip_bound * (1.0 + 1e-6) + 1e-12;
        ScalarField lp = sample(g, lambda_plus), lm = sample(g, lambda_minus);
        for (const ScalarField* u : {&lp, &lm}) {
            for (double v : u->values)
                if (v < lambda_min - 1e-12)
                    throw std::invalid_argument("CoefficientPair: sample below lambda_min");
            std::vector<int> idx(g.n);
            for (int k = 0; k < g.nt(); ++k)
                for (std::size_t s = 0; s < g.slice_size(); ++s) {
                    g.unflatten_spatial(s, idx);
                    const double v = u->at_flat(k, s);
                    if (k + 1 < g.nt() &&
                        std::abs(u->at_flat(k + 1, s) - v) > lip_tol * g.dt)
                        throw std::invalid_argument("CoefficientPair: time Lipschitz bound violated");
                    for (int a = 0; a < g.n; ++a)
                        if (idx[a] + 1 < g.nx(a) &&
                            std::abs(u->values[g.flat(k, idx) + g.stride(a)] - v) > lip_tol * g.h)
                            throw std::invalid_argument("CoefficientPair: space Lipschitz bound violated");
                }
        }
    }
};

/// Dirichlet data on the parabolic boundary of the grid box: the initial
/// slice plus the lateral faces.
struct BoundaryData {
    std::function<double(const Point&)> fn;

    double operator()(const Point& p) const { return fn(p); }
};

/// Largest jump between adjacent boundary samples, for the continuity check
/// |jump| <= C h on faces.
inline double boundary_max_jump(const GridSpec& g, const BoundaryData& data) {
    double worst = 0.0;
    std::vector<int> idx(g.n);
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (is_spatial_interior(g, idx)) continue;
            const double v = data(g.point(k, idx));
            for (int a = 0; a < g.n; ++a) {
                if (idx[a] + 1 >= g.nx(a)) continue;
                idx[a] += 1;
                if (!is_spatial_interior(g, idx))
                    worst = std::max(worst, std::abs(data(g.point(k, idx)) - v));
                idx[a] -= 1;
            }
        }
    return worst;
}

struct SolveControls {
    int max_iterations = 50;
    double tolerance = 1e-10;  // linear-system residual tolerance
    double deadband = 1e-12;   // |u| at or below this is treated as the zero set
};

struct SolveReport {
    std::vector<int> iterations_per_step;
    int final_active_set_changes = 0;   // sign flips in the last iteration (0 at convergence)
    long long frozen_nodes = 0;         // flip-flop guard activations
    double max_linear_residual = 0.0;
    double max_discrete_residual = 0.0; // recomputed independently after the solve
    double tolerance = 0.0;
    bool converged = false;

    std::string to_key_value() const {
        std::ostringstream out;
        out << "converged = " << (converged ? "true" : "false") << '\n';
        out << "steps = " << iterations_per_step.size() << '\n';
        int total = 0, worst = 0;
        for (int i : iterations_per_step) {
            total += i;
            worst = std::max(worst, i);
        }
        out << "total_iterations = " << total << '\n';
        out << "max_iterations_per_step = " << worst << '\n';
        out << "final_active_set_changes = " << final_active_set_changes << '\n';
        out << "frozen_nodes = " << frozen_nodes << '\n';
        out << "max_linear_residual = " << max_linear_residual << '\n';
        out << "max_discrete_residual = " << max_discrete_residual << '\n';
        out << "tolerance = " << tolerance << '\n';
        return out.str();
    }
};

/// Non-convergence of the active-set iteration; carries the last iterate and
/// the partial report.
class solve_error : public std::runtime_error {
  public:
    solve_error(const std::string& msg, ScalarField partial, SolveReport report)
        : std::runtime_error(msg),
          partial_(std::make_shared<ScalarField>(std::move(partial))),
          report_(std::make_shared<SolveReport>(std::move(report))) {}

    const ScalarField& partial() const { return *partial_; }
    const SolveReport& report() const { return *report_; }

  private:
    std::shared_ptr<ScalarField> partial_;
    std::shared_ptr<SolveReport> report_;
};

inline int chi_sign(double v, double deadband) {
    return v > deadband ? 1 : (v < -deadband ? -1 : 0);
}

/// Nodewise residual laplace(u) - du/dt - lam+ chi{u>0} + lam- chi{u<0} at
/// interior nodes (spatially interior, k >= 1); other nodes are marked
/// not applicable and carry value 0.
struct Residual {
    ScalarField field;
    std::vector<char> applicable;
    double max_abs = 0.0;
};

inline Residual residual(const ScalarField& u, const CoefficientPair& coeffs,
                         double deadband = 1e-12) {
    const GridSpec& g = u.grid;
    for (int a = 0; a < g.n; ++a)
        if (g.nx(a) < 3) throw std::invalid_argument("residual: need >= 3 nodes per axis");
    if (g.nt() < 2) throw std::invalid_argument("residual: need >= 2 time slices");

    Residual r{ScalarField(g, 0.0), std::vector<char>(g.node_count(), 0), 0.0};
    std::vector<int> idx(g.n);
    for (int k = 1; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (!is_spatial_interior(g, idx)) continue;
            const Point p = g.point(k, idx);
            const double v = u.at_flat(k, s);
            const int sign = chi_sign(v, deadband);
            const double rhs = sign > 0 ? coeffs.lambda_plus(p)
                                        : (sign < 0 ? -coeffs.lambda_minus(p) : 0.0);
            const double res = laplacian(u, k, idx) - time_derivative(u, k, idx) - rhs;
            const std::size_t f = g.flat(k, idx);
            r.field.values[f] = res;
            r.applicable[f] = 1;
            r.max_abs = std::max(r.max_abs, std::abs(res));
        }
    return r;
}

namespace solver_detail {

struct InteriorMap {
    std::vector<std::size_t> flat_of_unknown;
    std::vector<int> unknown_of_flat; // -1 for boundary nodes
    int bandwidth = 0;

    explicit InteriorMap(const GridSpec& g) {
        unknown_of_flat.assign(g.slice_size(), -1);
        std::vector<int> idx(g.n);
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (is_spatial_interior(g, idx)) {
                unknown_of_flat[s] = static_cast<int>(flat_of_unknown.size());
                flat_of_unknown.push_back(s);
            }
        }
        // Lexicographic numbering: the widest neighbor offset is along axis 0.
        int off = 1;
        for (int a = 1; a < g.n; ++a) off *= g.nx(a) - 2;
        bandwidth = g.n == 0 ? 0 : off;
    }
};

} // namespace solver_detail

/// Implicit time stepping for the two-phase problem. Returns the solved field
/// and a report; throws solve_error if a step does not converge.
inline std::pair<ScalarField, SolveReport> solve(const GridSpec& g, const CoefficientPair& coeffs,
                                                 const BoundaryData& data,
                                                 const SolveControls& controls = {}) {
    if (!coeffs.lambda_plus || !coeffs.lambda_minus)
        throw std::invalid_argument("solve: coefficients not set");
    if (!data.fn) throw std::invalid_argument("solve: boundary data not set");
    for (int a = 0; a < g.n; ++a)
        if (g.nx(a) < 3) throw std::invalid_argument("solve: need >= 3 nodes per axis");
    if (g.nt() < 2) throw std::invalid_argument("solve: need >= 2 time slices");

    const solver_detail::InteriorMap map(g);
    const int N = static_cast<int>(map.flat_of_unknown.size());
    const double ih2 = 1.0 / (g.h * g.h);

    // The system matrix A = 1/dt - laplace_h is fixed across steps and
    // active-set iterations and is factored once. Flip-flop nodes get pinned
    // to the zero set; the pinned solve uses the Schur complement of A^-1 on
    // the pinned columns, which are computed once per node and cached, so a
    // drifting pinned set never forces a refactorization.
    BandedCholesky chol(N, map.bandwidth);
    for (int p = 0; p < N; ++p) {
        chol.at(p, p) = 1.0 / g.dt + 2.0 * g.n * ih2;
        const std::size_t f = map.flat_of_unknown[p];
        for (int a = 0; a < g.n; ++a) {
            const int q = map.unknown_of_flat[f - g.stride(a)];
            if (q >= 0) chol.at(p, q) = -ih2; // q < p by lexicographic order
        }
    }
    chol.factor();

    std::map<int, std::vector<double>> inv_columns; // p -> A^-1 e_p
    auto inverse_column = [&](int p) -> const std::vector<double>& {
        auto it = inv_columns.find(p);
        if (it != inv_columns.end()) return it->second;
        if (inv_columns.size() > 1024) inv_columns.clear();
        std::vector<double> col(N, 0.0);
        col[p] = 1.0;
        chol.solve(col);
        return inv_columns.emplace(p, std::move(col)).first->second;
    };
    std::map<std::string, BandedCholesky> schur_cache; // pin set -> factored S

    // Solves A x = b with x = 0 enforced on the pinned set.
    auto pinned_solve = [&](std::vector<double>& x, const std::vector<char>& pinned,
                            const std::vector<int>& pin_list) {
        const int m = static_cast<int>(pin_list.size());
        if (m == N) { // fully pinned slice: the zero slice
            std::fill(x.begin(), x.end(), 0.0);
            return;
        }
        chol.solve(x);
        if (m == 0) return;
        std::string key(reinterpret_cast<const char*>(pin_list.data()),
                        pin_list.size() * sizeof(int));
        auto it = schur_cache.find(key);
        if (it == schur_cache.end()) {
            if (schur_cache.size() > 16) schur_cache.clear();
            BandedCholesky schur(m, m - 1); // dense SPD: S_ij = (A^-1)_{pi pj}
            for (int i = 0; i < m; ++i) {
                const auto& ci = inverse_column(pin_list[i]);
                for (int j = 0; j <= i; ++j) schur.at(i, j) = ci[pin_list[j]];
            }
            schur.factor();
            it = schur_cache.emplace(std::move(key), std::move(schur)).first;
        }
        std::vector<double> mu(m);
        for (int i = 0; i < m; ++i) mu[i] = x[pin_list[i]];
        it->second.solve(mu);
        for (int i = 0; i < m; ++i) {
            const auto& ci = inverse_column(pin_list[i]);
            const double w = mu[i];
            for (int p = 0; p < N; ++p) x[p] -= w * ci[p];
        }
        for (int p : pin_list) x[p] = 0.0; // exact on the pinned set
        (void)pinned;
    };

    ScalarField u(g, 0.0);
    SolveReport report;
    report.tolerance = controls.tolerance;

    std::vector<int> idx(g.n);
    // Initial slice comes straight from the data.
    for (std::size_t s = 0; s < g.slice_size(); ++s) {
        g.unflatten_spatial(s, idx);
        u.at_flat(0, s) = data(g.point(0, idx));
    }

    std::vector<double> rhs_fixed(N), rhs(N), sol(N);
    std::vector<double> lamp(N), lamm(N);
    std::vector<signed char> sign(N), prev(N), prev2(N);
    std::vector<char> frozen(N, 0), released(N, 0);

    auto fail = [&](int k, const std::string& why) {
        report.converged = false;
        const Residual res = residual(u, coeffs, controls.deadband);
        report.max_discrete_residual = res.max_abs;
        throw solve_error("solve: step " + std::to_string(k) + ": " + why, u, report);
    };

    for (int k = 1; k < g.nt(); ++k) {
        // Dirichlet values for this slice.
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (map.unknown_of_flat[s] < 0) u.at_flat(k, s) = data(g.point(k, idx));
        }
        // Coefficients at the new time level, and the sign-independent rhs.
        for (int p = 0; p < N; ++p) {
            const std::size_t f = map.flat_of_unknown[p];
            const Point pt = g.point_flat(k, f);
            lamp[p] = coeffs.lambda_plus(pt);
            lamm[p] = coeffs.lambda_minus(pt);
            double acc = u.at_flat(k - 1, f) / g.dt;
            for (int a = 0; a < g.n; ++a)
                for (const std::size_t nb : {f - g.stride(a), f + g.stride(a)})
                    if (map.unknown_of_flat[nb] < 0) acc += ih2 * u.at_flat(k, nb);
            rhs_fixed[p] = acc;
            // Warm start: signs from the previous slice; pinned nodes carry
            // over and sit at value 0, hence sign 0.
            sign[p] = static_cast<signed char>(
                chi_sign(u.at_flat(k - 1, f), controls.deadband));
            prev[p] = sign[p];
            prev2[p] = sign[p];
            released[p] = 0;
        }

        int iterations = 0;
        bool converged = false;
        int changes = 0;
        std::vector<int> pin_list;
        while (iterations < controls.max_iterations) {
            ++iterations;
            pin_list.clear();
            for (int p = 0; p < N; ++p)
                if (frozen[p]) pin_list.push_back(p);
            for (int p = 0; p < N; ++p)
                rhs[p] = frozen[p] ? 0.0
                                   : rhs_fixed[p] - (sign[p] > 0 ? lamp[p] : 0.0) +
                                         (sign[p] < 0 ? lamm[p] : 0.0);
            std::copy(rhs.begin(), rhs.end(), sol.begin());
            pinned_solve(sol, frozen, pin_list);

            changes = 0;
            for (int p = 0; p < N; ++p) {
                if (frozen[p]) continue;
                const signed char want =
                    static_cast<signed char>(chi_sign(sol[p], controls.deadband));
                const signed char cur = sign[p];
                if (want != cur) {
                    ++changes;
                    // Flip-flop guard: a node whose sign history reads a,b,a,b
                    // has no consistent assignment; pin it to the zero set.
                    // A single transient revisit is left alone.
                    if (want == prev[p] && cur == prev2[p]) {
                        frozen[p] = 1;
                        ++report.frozen_nodes;
                        prev2[p] = prev[p];
                        prev[p] = cur;
                        sign[p] = 0;
                        continue;
                    }
                    prev2[p] = prev[p];
                    prev[p] = cur;
                    sign[p] = want;
                    continue;
                }
                prev2[p] = prev[p];
                prev[p] = cur;
            }
            // Pinned nodes must carry an admissible multiplier: the stencil
            // value H = rhs_fixed - (A sol) has to lie in [-lam-, lam+].
            // The worst violator is released toward its phase, one node per
            // iteration; batch releases swing whole interface columns and
            // destabilize their neighbors.
            std::vector<std::pair<double, int>> violators;
            for (int p = 0; p < N; ++p) {
                if (!frozen[p] || released[p] >= 3) continue;
                const std::size_t f = map.flat_of_unknown[p];
                double asol = 0.0; // sol[p] = 0 at a pinned node
                for (int a = 0; a < g.n; ++a)
                    for (const std::size_t nb : {f - g.stride(a), f + g.stride(a)}) {
                        const int q = map.unknown_of_flat[nb];
                        if (q >= 0) asol -= ih2 * sol[q];
                    }
                const double H = rhs_fixed[p] - asol;
                const double over = std::max(H - lamp[p], -lamm[p] - H);
                if (over > 1e-9 * (1.0 + std::abs(H)))
                    violators.emplace_back(-over, p); // sort by decreasing violation
            }
            if (!violators.empty()) {
                // Release a spatially separated batch, worst violators first;
                // adjacent releases swing each other across zero.
                std::sort(violators.begin(), violators.end());
                std::vector<std::size_t> batch;
                for (const auto& [neg_over, p] : violators) {
                    const std::size_t f = map.flat_of_unknown[p];
                    bool clash = false;
                    std::vector<int> pi(g.n), bi(g.n);
                    g.unflatten_spatial(f, pi);
                    for (const std::size_t bf : batch) {
                        g.unflatten_spatial(bf, bi);
                        int dist = 0;
                        for (int a = 0; a < g.n; ++a)
                            dist = std::max(dist, std::abs(pi[a] - bi[a]));
                        if (dist < 3) {
                            clash = true;
                            break;
                        }
                    }
                    if (clash) continue;
                    batch.push_back(f);
                    const std::size_t fp = map.flat_of_unknown[p];
                    double asol = 0.0;
                    for (int a = 0; a < g.n; ++a)
                        for (const std::size_t nb : {fp - g.stride(a), fp + g.stride(a)}) {
                            const int q = map.unknown_of_flat[nb];
                            if (q >= 0) asol -= ih2 * sol[q];
                        }
                    const double H = rhs_fixed[p] - asol;
                    frozen[p] = 0;
                    ++released[p];
                    sign[p] = H > 0.0 ? 1 : -1;
                    prev[p] = sign[p];
                    prev2[p] = sign[p];
                    ++changes;
                }
            }
            if (changes == 0) {
                converged = true;
                break;
            }
        }
        report.iterations_per_step.push_back(iterations);
        report.final_active_set_changes = changes;
        for (int p = 0; p < N; ++p) u.at_flat(k, map.flat_of_unknown[p]) = sol[p];
        if (!converged) fail(k, "active set did not settle in max_iterations");

        // Residual of the last linear solve, recomputed from the reduced
        // system's defining stencil (pinned nodes carry the value 0).
        double lin = 0.0;
        for (int p = 0; p < N; ++p) {
            if (frozen[p]) continue;
            const std::size_t f = map.flat_of_unknown[p];
            double av = (1.0 / g.dt + 2.0 * g.n * ih2) * sol[p];
            for (int a = 0; a < g.n; ++a)
                for (const std::size_t nb : {f - g.stride(a), f + g.stride(a)}) {
                    const int q = map.unknown_of_flat[nb];
                    if (q >= 0 && !frozen[q]) av -= ih2 * sol[q];
                }
            lin = std::max(lin, std::abs(av - rhs[p]));
        }
        report.max_linear_residual = std::max(report.max_linear_residual, lin);
        if (lin > controls.tolerance) fail(k, "linear solve residual above tolerance");
    }

    report.converged = true;
    const Residual res = residual(u, coeffs, controls.deadband);
    report.max_discrete_residual = res.max_abs;
    return {std::move(u), std::move(report)};
}

/// Two forward solves from a shared slice and shared lateral data; the inputs
/// may differ only in how they were constructed for earlier times.
inline std::pair<ScalarField, ScalarField> solve_forward_pair(const BoundaryData& u1_data,
                                                              const BoundaryData& u2_data,
                                                              const CoefficientPair& coeffs,
                                                              const GridSpec& g,
                                                              const SolveControls& controls = {}) {
    std::vector<int> idx(g.n);
    for (int k = 0; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (k > 0 && is_spatial_interior(g, idx)) continue;
            const Point p = g.point(k, idx);
            if (std::abs(u1_data(p) - u2_data(p)) > 1e-9)
                throw std::invalid_argument("solve_forward_pair: data mismatch on shared boundary");
        }
    auto [v1, r1] = solve(g, coeffs, u1_data, controls);
    auto [v2, r2] = solve(g, coeffs, u2_data, controls);
    return {std::move(v1), std::move(v2)};
}

} // namespace parobs

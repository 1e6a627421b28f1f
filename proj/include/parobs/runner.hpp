#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "parobs/field_io.hpp"
#include "parobs/freeboundary.hpp"
#include "parobs/monotonicity.hpp"
#include "parobs/scenarios.hpp"
#include "parobs/verify.hpp"

// Scenario execution: solve, run the scenario's named checks, and collect
// deterministic artifacts (CSV payloads and a human-readable summary).

namespace parobs {

struct RunOutcome {
    std::string scenario;
    bool pass = true;
    std::vector<std::string> summary;
    std::vector<std::pair<std::string, std::string>> artifacts; // name -> bytes

    void line(const std::string& s) { summary.push_back(s); }
    void record(bool ok, const std::string& s) {
        pass = pass && ok;
        summary.push_back(std::string(ok ? "pass " : "FAIL ") + s);
    }
    std::string summary_text() const {
        std::string out;
        for (const auto& s : summary) out += s + '\n';
        return out;
    }
};

namespace runner_detail {

inline std::string fmt(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

inline double max_interior_error(const ScalarField& u,
                                 const std::function<double(const Point&)>& ref) {
    const GridSpec& g = u.grid;
    double worst = 0.0;
    std::vector<int> idx(g.n);
    for (int k = 1; k < g.nt(); ++k)
        for (std::size_t s = 0; s < g.slice_size(); ++s) {
            g.unflatten_spatial(s, idx);
            if (!is_spatial_interior(g, idx)) continue;
            worst = std::max(worst, std::abs(u.at_flat(k, s) - ref(g.point(k, idx))));
        }
    return worst;
}

/// Central directional difference along one axis, on a grid shrunk by h at
/// the two ends of that axis.
inline ScalarField directional_difference_field(const ScalarField& u, int axis) {
    const GridSpec& g = u.grid;
    std::vector<std::array<double, 2>> extent = g.extent;
    extent[axis] = {g.extent[axis][0] + g.h, g.extent[axis][1] - g.h};
    GridSpec gg(extent, g.h, g.time, g.dt);
    ScalarField d(gg, 0.0);
    std::vector<int> idx(g.n);
    for (int k = 0; k < gg.nt(); ++k)
        for (std::size_t s = 0; s < gg.slice_size(); ++s) {
            gg.unflatten_spatial(s, idx);
            idx[axis] += 1; // same node in the parent grid
            const std::size_t f = g.flat(k, idx);
            d.at_flat(k, s) =
                (u.values[f + g.stride(axis)] - u.values[f - g.stride(axis)]) / (2.0 * g.h);
            idx[axis] -= 1;
        }
    return d;
}

/// Branch point nearest the origin of the scenario window.
inline std::optional<Point> find_branch_point(const ScalarField& u, double sigma,
                                              double window_radius) {
    const CylinderSpec window(Point(0.0, std::vector<double>(u.grid.n, 0.0)), window_radius);
    // Solved fields resolve the free boundary to O(h^2) in value, so the
    // zero-set deadband must scale with the grid.
    const auto rep = detect_branch_points(u, sigma, window, u.grid.h * u.grid.h);
    if (rep.hits.empty()) return std::nullopt;
    const Point origin(0.0, std::vector<double>(u.grid.n, 0.0));
    const auto best = std::min_element(rep.hits.begin(), rep.hits.end(),
                                       [&](const auto& a, const auto& b) {
                                           return pardist(a.point, origin) < pardist(b.point, origin);
                                       });
    return best->point;
}

} // namespace runner_detail

inline RunOutcome run_scenario(const Scenario& sc, std::vector<std::string> selected = {},
                               const ScenarioOptions& build_opts = {}) {
    using runner_detail::fmt;
    RunOutcome out;
    out.scenario = sc.name;
    out.line("scenario " + sc.name + " (seed " + std::to_string(sc.seed) + ")");
    out.line("  " + sc.description);

    auto wants = [&](const std::string& check) {
        if (std::find(sc.checks.begin(), sc.checks.end(), check) == sc.checks.end()) return false;
        return selected.empty() ||
               std::find(selected.begin(), selected.end(), check) != selected.end();
    };
    for (const auto& want : selected)
        if (std::find(sc.checks.begin(), sc.checks.end(), want) == sc.checks.end())
            throw std::invalid_argument("scenario " + sc.name + " has no check named '" + want +
                                        "'");

    // Every check consumes the solved field.
    ScalarField u;
    SolveReport report;
    try {
        auto solved = solve(sc.grid, sc.coeffs, sc.data, sc.controls);
        u = std::move(solved.first);
        report = std::move(solved.second);
    } catch (const solve_error& e) {
        out.record(false, std::string("solve: ") + e.what());
        out.artifacts.emplace_back(sc.name + "_report.txt", e.report().to_key_value());
        return out;
    }
    out.artifacts.emplace_back(sc.name + "_field.csv", field_to_csv(u));
    out.artifacts.emplace_back(sc.name + "_report.txt", report.to_key_value());
    if (wants("solve")) {
        out.record(report.converged,
                   "solve: converged, max residual " + fmt(report.max_discrete_residual) +
                       ", frozen nodes " + std::to_string(report.frozen_nodes));
        if (sc.expects_exact_residual)
            out.record(report.max_discrete_residual <= report.tolerance,
                       "solve: discrete residual within the solver tolerance " +
                           fmt(report.tolerance));
    }

    std::vector<EstimateReport> estimates;

    if (wants("reproduction")) {
        const double err = runner_detail::max_interior_error(u, sc.reference);
        out.record(err <= 5e-3,
                   "reproduction: max interior error " + fmt(err) + " <= 0.005");
        out.line("  grid h=" + fmt(sc.grid.h) + " dt=" + fmt(sc.grid.dt));
    }

    // Shared branch-point context.
    std::optional<Point> branch;
    std::vector<double> nu = sc.profile_direction;
    if (wants("nondegeneracy") || wants("directional-monotonicity") ||
        wants("tempo-spatial-monotonicity") || wants("closeness-decay") ||
        wants("time-derivative-decay") || wants("lipschitz-graphs") ||
        wants("normal-modulus") || wants("sup-mean-ratio")) {
        branch = runner_detail::find_branch_point(u, 0.1, 0.4);
        if (branch) {
            const auto close = closeness_to_h(u, sc.coeffs, *branch, 0.25);
            nu = close.direction;
            out.line("  branch point at t=" + fmt(branch->t) + " x1=" + fmt(branch->x[0]) +
                     " x2=" + fmt(branch->x[1]) + ", profile direction (" + fmt(nu[0]) + "," +
                     fmt(nu[1]) + ")");
        } else {
            out.record(false, "branch point detection found no candidate");
        }
    }

    if (wants("nondegeneracy") && branch) {
        const auto cloud_pos = extract_free_boundary(u, Phase::positive);
        const auto cloud_neg = extract_free_boundary(u, Phase::negative);
        std::size_t checked = 0, failed = 0;
        double worst_margin = kInfiniteDistance;
        for (double r : {0.125, 0.25}) {
            for (Phase phase : {Phase::positive, Phase::negative}) {
                const auto& cloud = phase == Phase::positive ? cloud_pos : cloud_neg;
                for (const Point& base : cloud) {
                    if (!cylinder_in_domain(u.grid, CylinderSpec(base, 2.0 * r))) continue;
                    auto rep = check_nondegeneracy(u, sc.coeffs, base, r, phase, {});
                    ++checked;
                    if (!rep.pass) ++failed;
                    worst_margin = std::min(worst_margin, rep.margin);
                    estimates.push_back(std::move(rep));
                }
            }
        }
        out.record(checked > 0 && failed == 0,
                   "nondegeneracy: " + std::to_string(checked) + " boundary bases at r in "
                   "{1/8, 1/4}, " + std::to_string(failed) + " failures, worst margin " +
                       fmt(worst_margin));
    }

    if (wants("phi-monotonicity")) {
        // The kernel mass of the r = 1/2 energy reaches |x| ~ 3, so the trace
        // is taken on a widened box at the same resolution.
        ScenarioOptions wide = build_opts;
        wide.box_halfwidth = 3.0;
        const Scenario scw = build_scenario(sc.name, wide);
        auto [uw, repw] = solve(scw.grid, scw.coeffs, scw.data, scw.controls);
        EnergyOptions eopt;
        eopt.allow_box_truncation = true;
        const double radii[4] = {0.125, 1.0 / 6.0, 0.25, 0.5};
        bool ok = true;
        for (int axis : {1, 0}) {
            const ScalarField d = runner_detail::directional_difference_field(uw, axis);
            const MonotonicityTrace tr = phi(d, radii, eopt);
            double peak = 0.0;
            for (double v : tr.phi) peak = std::max(peak, std::abs(v));
            const auto rep = check_monotone(tr, 1e-3 * peak);
            ok = ok && rep.monotone;
            out.artifacts.emplace_back(sc.name + "_phi_e" + std::to_string(axis + 1) + ".csv",
                                       trace_to_csv(tr));
            out.line("  phi trace (difference along x" + std::to_string(axis + 1) +
                     "): peak " + fmt(peak) + (rep.monotone ? ", nondecreasing" : ", VIOLATED"));
        }
        out.record(ok, "phi-monotonicity: traces nondecreasing within 1e-3 * max phi");
    }

    if (wants("directional-monotonicity") && branch) {
        const double r = 0.25, eps = 0.5;
        bool gates = true, ineq = true;
        const HProfile href(sc.coeffs.lambda_plus(*branch), sc.coeffs.lambda_minus(*branch), nu);
        for (const auto& e : cone_directions(nu, eps, 16)) {
            MonotonicityCheckOptions opt;
            opt.eps = eps;
            auto rep = check_directional_monotonicity(u, sc.coeffs, href, *branch, r, e, opt);
            gates = gates && rep.gate->satisfied;
            ineq = ineq && rep.pass;
            estimates.push_back(std::move(rep));
        }
        out.record(gates, "directional-monotonicity: closeness gate at r=1/4 (delta " +
                              fmt(spatial_gate_delta(sc.coeffs.lambda_min, eps, sc.grid.n)) + ")");
        out.record(ineq, "directional-monotonicity: 16-direction cone with e.nu >= 1/2");
    }

    if (wants("tempo-spatial-monotonicity") && branch) {
        const double r = 0.125, eps = 0.5;
        bool gates = true, ineq = true;
        const HProfile href(sc.coeffs.lambda_plus(*branch), sc.coeffs.lambda_minus(*branch), nu);
        for (double alpha : {-1.0, 0.0, 1.0}) {
            MonotonicityCheckOptions opt;
            opt.eps = eps;
            opt.r_tilde = sc.r_tilde;
            opt.sigma_tilde = sc.sigma_tilde;
            auto rep =
                check_tempo_spatial_monotonicity(u, sc.coeffs, href, *branch, r, alpha,
                                                 std::span<const double>(nu), opt);
            gates = gates && rep.gate->satisfied;
            ineq = ineq && rep.pass;
            estimates.push_back(std::move(rep));
        }
        out.record(gates, "tempo-spatial-monotonicity: gate at r=1/8 with recorded (r~,s~)=(" +
                              fmt(sc.r_tilde) + "," + fmt(sc.sigma_tilde) + ")");
        out.record(ineq, "tempo-spatial-monotonicity: alpha in {-1,0,1}");
    }

    if (wants("closeness-decay") && branch) {
        std::vector<double> totals;
        for (double r : {0.25, 0.125, 0.0625}) {
            const auto rep = closeness_to_h(u, sc.coeffs, *branch, r);
            totals.push_back(rep.total);
            out.line("  closeness r=" + fmt(r) + ": value " + fmt(rep.value_term) + " grad " +
                     fmt(rep.gradient_term) + " dt " + fmt(rep.time_term) + " total " +
                     fmt(rep.total));
        }
        const bool decreasing = totals[1] < totals[0] && totals[2] < totals[1];
        out.record(decreasing, "closeness-decay: totals decrease over r in {1/4, 1/8, 1/16}");
    }

    if (wants("time-derivative-decay") && branch) {
        const double radii[3] = {0.25, 0.125, 0.0625};
        const auto rep = blowup_time_derivative_decay(u, *branch, radii);
        out.record(rep.pass, "time-derivative-decay: sup|du/dt| " + fmt(rep.sups[0]) + " -> " +
                                 fmt(rep.sups[1]) + " -> " + fmt(rep.sups[2]) +
                                 " (nonincreasing, final <= half)");
    }

    if (wants("lipschitz-graphs") && branch) {
        const CylinderSpec window(*branch, 0.125);
        bool ok = true;
        for (Phase phase : {Phase::positive, Phase::negative}) {
            const auto cloud = extract_free_boundary(u, phase);
            auto graph = fit_graph(cloud, nu, window, u.grid.h, u.grid.dt, phase);
            const auto [sp, tp] = lipschitz_norms(graph);
            ok = ok && sp <= 1.0;
            out.line(std::string("  graph ") + (phase == Phase::positive ? "d{u>0}" : "d{u<0}") +
                     ": spatial Lipschitz " + fmt(sp) + ", temporal quotient " + fmt(tp));
            out.artifacts.emplace_back(sc.name + (phase == Phase::positive ? "_graph_pos.csv"
                                                                           : "_graph_neg.csv"),
                                       graph_to_csv(graph));
        }
        out.record(ok, "lipschitz-graphs: spatial Lipschitz norms <= 1 in Q_{1/8}(branch)");
    }

    if (wants("normal-modulus") && branch) {
        const CylinderSpec window(*branch, 0.25);
        const double bins[3] = {0.05, 0.1, 0.2};
        bool ok = true;
        for (Phase phase : {Phase::positive, Phase::negative}) {
            const auto cloud = extract_free_boundary(u, phase);
            auto graph = fit_graph(cloud, nu, window, u.grid.h, u.grid.dt, phase);
            fit_normals(graph);
            const auto table = normal_continuity(graph, bins);
            ok = ok && table.pairs > 0;
            out.artifacts.emplace_back(sc.name + (phase == Phase::positive ? "_modulus_pos.csv"
                                                                           : "_modulus_neg.csv"),
                                       modulus_to_csv(table));
            out.line(std::string("  modulus ") + (phase == Phase::positive ? "d{u>0}" : "d{u<0}") +
                     ": " + fmt(table.max_gap[0]) + " / " + fmt(table.max_gap[1]) + " / " +
                     fmt(table.max_gap[2]) + " at delta 0.05/0.1/0.2");
        }
        out.record(ok, "normal-modulus: tables computed on both phase boundaries");
    }

    if (wants("sup-mean-ratio") && branch) {
        double worst_ratio = 0.0;
        for (double r : {0.125, 0.25}) {
            auto rep = sup_mean_time_derivative(u, *branch, r);
            worst_ratio = std::max(worst_ratio, rep.notes.at("ratio"));
            estimates.push_back(std::move(rep));
        }
        out.record(worst_ratio <= 10.0,
                   "sup-mean-ratio: sup|du/dt| / bracket bounded (worst " + fmt(worst_ratio) +
                       ")");
    }

    if (wants("sign-persistence")) {
        const Point base(0.0, {0.3, 0.0});
        const auto rep = check_sign_persistence(u, base, 0.25, 0.5);
        estimates.push_back(rep);
        out.record(rep.pass, "sign-persistence: empirical c = " + fmt(rep.notes.at("c")) +
                                 " >= 0.5");
    }

    if (wants("forward-uniqueness")) {
        const WStarProfile alt(1.0, 1.0, {1.0, 0.0}); // same values, other construction
        BoundaryData d2{[alt](const Point& p) { return alt.value(p); }};
        auto [v1, v2] = solve_forward_pair(sc.data, d2, sc.coeffs, sc.grid, sc.controls);
        auto rep = check_forward_uniqueness(v1, v2, sc.controls.tolerance);
        out.record(rep.pass, "forward-uniqueness: pair difference " + fmt(rep.lhs) + " <= " +
                                 fmt(rep.rhs));
        estimates.push_back(rep);
        // negative control: a deliberate lateral mismatch must be detected
        BoundaryData bad{[&](const Point& p) {
            return sc.data(p) + (p.x[0] == sc.grid.extent[0][1] ? 5e-3 : 0.0);
        }};
        auto [w1, rep1] = solve(sc.grid, sc.coeffs, sc.data, sc.controls);
        auto [w2, rep2] = solve(sc.grid, sc.coeffs, bad, sc.controls);
        const auto control = check_forward_uniqueness(w1, w2, sc.controls.tolerance);
        out.record(!control.pass, "forward-uniqueness: negative control fails as expected "
                                  "(difference " + fmt(control.lhs) + ")");
    }

    if (wants("oddness") || wants("reflect-residual") || wants("counterexample-geometry")) {
        const ScalarField v = reflect_odd(u, 1e-9);
        out.artifacts.emplace_back(sc.name + "_reflected.csv", field_to_csv(v));

        if (wants("oddness")) {
            bool exact = true;
            const GridSpec& gg = v.grid;
            std::vector<int> idx(gg.n), mir(gg.n);
            for (int k = 0; k < gg.nt() && exact; ++k)
                for (std::size_t s = 0; s < gg.slice_size(); ++s) {
                    gg.unflatten_spatial(s, idx);
                    mir = idx;
                    mir[0] = gg.nx(0) - 1 - idx[0];
                    if (v.at_flat(k, s) != -v.at(k, mir)) {
                        exact = false;
                        break;
                    }
                }
            out.record(exact, "oddness: v(t,x1,x') = -v(t,-x1,x') exactly on nodes");
        }
        if (wants("reflect-residual")) {
            const auto ru = residual(u, sc.coeffs);
            const auto rv = residual(v, sc.coeffs);
            out.record(rv.max_abs <= ru.max_abs + 1e-12,
                       "reflect-residual: reflection adds no residual (" + fmt(rv.max_abs) +
                           " vs " + fmt(ru.max_abs) + ")");
        }
        if (wants("counterexample-geometry")) {
            auto temporal_quotient = [&](const ScalarField& field, double& spatial_out) {
                // centered on the contact line's t = 0 position
                const Point center(0.0, {0.0, -0.23});
                const CylinderSpec window(center, 0.45);
                const auto cloud = extract_free_boundary(field, Phase::positive);
                auto graph = fit_graph(cloud, {1.0, 0.0}, window, field.grid.h, field.grid.dt);
                const auto [sp, tp] = lipschitz_norms(graph);
                spatial_out = sp;
                return tp;
            };
            double sp_coarse = 0.0;
            const double tq_coarse = temporal_quotient(v, sp_coarse);
            out.record(sp_coarse <= 1.0, "counterexample: spatial Lipschitz norm " +
                                             fmt(sp_coarse) + " <= 1 near the contact point");

            ScenarioOptions fine = build_opts;
            fine.cells *= 2;
            fine.steps *= 4;
            const Scenario scf = build_scenario(sc.name, fine);
            auto [uf, repf] = solve(scf.grid, scf.coeffs, scf.data, scf.controls);
            const ScalarField vf = reflect_odd(uf, 1e-9);
            double sp_fine = 0.0;
            const double tq_fine = temporal_quotient(vf, sp_fine);
            const bool nondecay = tq_fine >= 0.8 * tq_coarse;
            out.record(nondecay, "counterexample: temporal-quotient non-decay flag (coarse " +
                                     fmt(tq_coarse) + ", refined " + fmt(tq_fine) +
                                     ", refined >= 80% of coarse)");
        }
    }

    if (!estimates.empty())
        out.artifacts.emplace_back(sc.name + "_estimates.csv",
                                   reports_to_csv(estimates, sc.grid.n));
    out.artifacts.emplace_back(sc.name + "_summary.txt", out.summary_text());
    return out;
}

} // namespace parobs

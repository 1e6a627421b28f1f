#include <doctest.h>

#include <cmath>

#include "parobs/exact.hpp"
#include "parobs/solver.hpp"

using namespace parobs;

namespace {

GridSpec box2(int cells, int steps, std::array<double, 2> time = {-1.0, 1.0}) {
    return GridSpec({{-1.0, 1.0}, {-1.0, 1.0}}, 2.0 / cells,
                    time, (time[1] - time[0]) / steps);
}

double max_interior_error(const ScalarField& u, const std::function<double(const Point&)>& ref) {
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

} // namespace

TEST_CASE("banded Cholesky solves SPD systems") {
    // 1D Poisson matrix, solution fixed by construction.
    const int n = 12;
    BandedCholesky chol(n, 1);
    for (int i = 0; i < n; ++i) {
        chol.at(i, i) = 2.0;
        if (i > 0) chol.at(i, i - 1) = -1.0;
    }
    chol.factor();
    std::vector<double> x(n), b(n, 0.0);
    for (int i = 0; i < n; ++i) x[i] = std::sin(0.3 * i);
    for (int i = 0; i < n; ++i) {
        b[i] = 2.0 * x[i];
        if (i > 0) b[i] -= x[i - 1];
        if (i + 1 < n) b[i] -= x[i + 1];
    }
    chol.solve(b);
    for (int i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("solve reproduces the stationary two-phase profile from its traces") {
    const HProfile h(1.0, 1.0, {1.0, 0.0});
    const CoefficientPair coeffs = CoefficientPair::constant(1.0, 1.0);
    const BoundaryData data{[&](const Point& p) { return h.value(p); }};

    for (int cells : {32, 64}) {
        const GridSpec g = box2(cells, 16);
        auto [u, report] = solve(g, coeffs, data);
        CHECK(report.converged);
        CHECK(report.final_active_set_changes == 0);
        CHECK(max_interior_error(u, [&](const Point& p) { return h.value(p); }) <= 1e-9);
        CHECK(report.max_discrete_residual <= report.tolerance);
    }
}

TEST_CASE("zero data gives the zero solution") {
    const GridSpec g = box2(8, 8);
    const CoefficientPair coeffs = CoefficientPair::constant(2.0, 0.5);
    auto [u, report] = solve(g, coeffs, BoundaryData{[](const Point&) { return 0.0; }});
    CHECK(report.converged);
    for (double v : u.values) CHECK(v == 0.0);
}

TEST_CASE("solve tracks the caloric polynomial within C (h^2 + dt)") {
    // z = -t is exact for t < 0 and degenerates at the final slice, where the
    // flip-flop guard settles the chatter with an O(dt) defect.
    const PolynomialCaloricProfile z(1.0, {0.0, 0.0}, 1.0);
    const GridSpec g = box2(16, 16, {-1.0, 0.0});
    auto [u, report] = solve(g, CoefficientPair::constant(1.0, 1.0),
                             BoundaryData{[&](const Point& p) { return z.value(p); }});
    CHECK(report.converged);
    const double err = max_interior_error(u, [&](const Point& p) { return z.value(p); });
    CHECK(err <= 2.0 * (g.h * g.h + g.dt));
}

TEST_CASE("interior error shrinks by >= 3 when h and sqrt(dt) halve") {
    // Piecewise-quadratic catalogue profiles are reproduced exactly, so the
    // order measurement needs a manufactured positive solution with genuine
    // curvature in space and time: u* = e^{-t} (2 + 0.5 sin x1 cos x2) solves
    // the one-phase equation with lam+ = e^{-t} (2 - 0.5 sin x1 cos x2) > 0.
    auto ref = [](const Point& p) {
        return std::exp(-p.t) * (2.0 + 0.5 * std::sin(p.x[0]) * std::cos(p.x[1]));
    };
    CoefficientPair coeffs;
    coeffs.lambda_plus = [](const Point& p) {
        return std::exp(-p.t) * (2.0 - 0.5 * std::sin(p.x[0]) * std::cos(p.x[1]));
    };
    coeffs.lambda_minus = [](const Point&) { return 1.0; };
    coeffs.lambda_min = 0.5;
    coeffs.lip_bound = 10.0;
    const BoundaryData data{[&](const Point& p) { return ref(p); }};

    const GridSpec coarse = box2(16, 8, {0.0, 1.0});
    const GridSpec fine = box2(32, 32, {0.0, 1.0});
    auto [uc, rc] = solve(coarse, coeffs, data);
    auto [uf, rf] = solve(fine, coeffs, data);
    const double ec = max_interior_error(uc, ref);
    const double ef = max_interior_error(uf, ref);
    CHECK(ec > 1e-8); // a genuine discretization error, not solver noise
    CHECK(ef <= ec / 3.0);
}

TEST_CASE("residual marks interior nodes and matches hand values") {
    const GridSpec g = box2(16, 8);
    const CoefficientPair coeffs = CoefficientPair::constant(1.0, 1.0);

    SUBCASE("w* samples vanish away from the interface band") {
        const WStarProfile w(1.0, 1.0, {0.0, 1.0});
        const Residual r = residual(w.sample_onto(g), coeffs);
        std::vector<int> idx(2);
        for (int k = 1; k < g.nt(); ++k)
            for (idx[0] = 1; idx[0] < g.nx(0) - 1; ++idx[0])
                for (idx[1] = 1; idx[1] < g.nx(1) - 1; ++idx[1]) {
                    const Point p = g.point(k, idx);
                    CHECK(r.applicable[g.flat(k, idx)] == 1);
                    if (std::abs(p.x[1]) > 2.0 * g.h + 1e-12)
                        CHECK(std::abs(r.field.at(k, idx)) <= 1e-10);
                }
    }
    SUBCASE("constant one gives residual -lambda_plus") {
        const Residual r = residual(ScalarField(g, 1.0), coeffs);
        std::vector<int> idx(2);
        for (int k = 1; k < g.nt(); k += 3)
            for (idx[0] = 1; idx[0] < g.nx(0) - 1; idx[0] += 3)
                for (idx[1] = 1; idx[1] < g.nx(1) - 1; idx[1] += 3)
                    CHECK(r.field.at(k, idx) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("boundary and initial slices are not applicable") {
        const Residual r = residual(ScalarField(g, 1.0), coeffs);
        const int edge[2] = {0, 3};
        CHECK(r.applicable[g.flat(1, edge)] == 0);
        const int inner[2] = {3, 3};
        CHECK(r.applicable[g.flat(0, inner)] == 0);
    }
    SUBCASE("undersized grids are rejected") {
        GridSpec tiny({{-1.0, 1.0}, {-1.0, 1.0}}, 2.0, {0.0, 1.0}, 0.5); // 2 nodes per axis
        CHECK_THROWS_AS(residual(ScalarField(tiny, 0.0), coeffs), std::invalid_argument);
    }
}

TEST_CASE("discrete comparison principle") {
    const GridSpec g = box2(12, 12);
    const CoefficientPair coeffs = CoefficientPair::constant(1.0, 1.0);
    const HProfile h(1.0, 1.0, {1.0, 0.0});
    const BoundaryData lo{[&](const Point& p) { return h.value(p) - 0.05; }};
    const BoundaryData hi{[&](const Point& p) { return h.value(p) + 0.05 * (2.0 + std::sin(p.t)); }};
    auto [ul, r1] = solve(g, coeffs, lo);
    auto [uh, r2] = solve(g, coeffs, hi);
    for (std::size_t i = 0; i < ul.values.size(); ++i)
        CHECK(ul.values[i] <= uh.values[i] + 1e-8);
}

TEST_CASE("forward pair") {
    const GridSpec g = box2(12, 8, {0.0, 1.0});
    const CoefficientPair coeffs = CoefficientPair::constant(1.0, 1.0);
    const HProfile h(1.0, 1.0, {1.0, 0.0});
    const WStarProfile w(1.0, 1.0, {1.0, 0.0}); // same values, different construction

    SUBCASE("identical data give bitwise-identical fields") {
        const BoundaryData d{[&](const Point& p) { return h.value(p); }};
        auto [v1, v2] = solve_forward_pair(d, d, coeffs, g);
        for (std::size_t i = 0; i < v1.values.size(); ++i) CHECK(v1.values[i] == v2.values[i]);
    }
    SUBCASE("two construction histories of the same data stay within tolerance") {
        const BoundaryData d1{[&](const Point& p) { return h.value(p); }};
        const BoundaryData d2{[&](const Point& p) { return w.value(p); }};
        auto [v1, v2] = solve_forward_pair(d1, d2, coeffs, g);
        double worst = 0.0;
        for (std::size_t i = 0; i < v1.values.size(); ++i)
            worst = std::max(worst, std::abs(v1.values[i] - v2.values[i]));
        CHECK(worst <= 1e-9);
    }
    SUBCASE("mismatched shared data is rejected") {
        const BoundaryData d1{[&](const Point& p) { return h.value(p); }};
        const BoundaryData d2{[&](const Point& p) { return h.value(p) + 1e-3; }};
        CHECK_THROWS_AS(solve_forward_pair(d1, d2, coeffs, g), std::invalid_argument);
    }
    SUBCASE("lateral perturbation propagates boundedly") {
        // The perturbation moves the free boundary off the grid columns, so
        // the zero-set freeze contributes an O(lambda h sqrt(dt)) interface
        // defect on this deliberately coarse grid. The empirical stability
        // constant is recorded by the bound below, not asserted to a model.
        const BoundaryData d1{[&](const Point& p) { return h.value(p); }};
        const BoundaryData d2{[&](const Point& p) {
            return h.value(p) + (p.x[0] == 1.0 ? 1e-3 : 0.0);
        }};
        auto [v1, rep1] = solve(g, coeffs, d1);
        auto [v2, rep2] = solve(g, coeffs, d2);
        double worst = 0.0;
        for (std::size_t i = 0; i < v1.values.size(); ++i)
            worst = std::max(worst, std::abs(v1.values[i] - v2.values[i]));
        CHECK(worst > 0.0);
        CHECK(worst <= 2.0 * g.h * std::sqrt(g.dt) + 1e-2 * 1e-3);
    }
}

TEST_CASE("non-convergence carries the last iterate and report") {
    const PolynomialCaloricProfile z(1.0, {0.0, 0.0}, 1.0);
    const GridSpec g = box2(8, 8, {-1.0, 0.0});
    SolveControls controls;
    controls.max_iterations = 2; // the degenerate final slice needs 3
    try {
        solve(g, CoefficientPair::constant(1.0, 1.0),
              BoundaryData{[&](const Point& p) { return z.value(p); }}, controls);
        FAIL("expected solve_error");
    } catch (const solve_error& e) {
        CHECK(e.partial().grid.node_count() == g.node_count());
        CHECK_FALSE(e.report().converged);
        CHECK(e.report().iterations_per_step.back() == 2);
    }
}

TEST_CASE("coefficient pair validation") {
    const GridSpec g = box2(8, 4);
    SUBCASE("constant coefficients validate") {
        CHECK_NOTHROW(CoefficientPair::constant(1.0, 2.0).validate_on(g));
    }
    SUBCASE("sample below the recorded lower bound") {
        CoefficientPair c = CoefficientPair::constant(1.0, 1.0);
        c.lambda_min = 1.5;
        CHECK_THROWS_AS(c.validate_on(g), std::invalid_argument);
    }
    SUBCASE("Lipschitz bound violations are caught") {
        CoefficientPair c;
        c.lambda_plus = [](const Point& p) { return 1.0 + 0.5 * std::abs(p.x[0]); };
        c.lambda_minus = [](const Point&) { return 1.0; };
        c.lambda_min = 1.0;
        c.lip_bound = 0.1; // true slope is 0.5
        CHECK_THROWS_AS(c.validate_on(g), std::invalid_argument);
        c.lip_bound = 0.5;
        CHECK_NOTHROW(c.validate_on(g));
    }
}

TEST_CASE("boundary jump stays O(h) for smooth data") {
    const GridSpec g = box2(16, 4);
    const BoundaryData d{[](const Point& p) { return std::sin(p.x[0] + p.x[1]) + 0.3 * p.t; }};
    CHECK(boundary_max_jump(g, d) <= 2.0 * g.h);
}

TEST_CASE("solve report serializes as a key=value block") {
    const GridSpec g = box2(8, 4);
    auto [u, report] = solve(g, CoefficientPair::constant(1.0, 1.0),
                             BoundaryData{[](const Point&) { return 0.0; }});
    const std::string block = report.to_key_value();
    CHECK(block.find("converged = true") != std::string::npos);
    CHECK(block.find("max_discrete_residual = ") != std::string::npos);
    CHECK(block.find("steps = 4") != std::string::npos);
}

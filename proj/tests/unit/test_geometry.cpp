#include <doctest.h>

#include <random>
#include <sstream>

#include "parobs/field_io.hpp"
#include "parobs/geometry.hpp"

using namespace parobs;

namespace {

GridSpec small_grid(int n, int cells, int steps) {
    std::vector<std::array<double, 2>> ext(n, {-1.0, 1.0});
    return GridSpec(ext, 2.0 / cells, {-1.0, 1.0}, 2.0 / steps);
}

Point rand_point(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    Point p;
    p.t = d(rng);
    p.x.resize(n);
    for (auto& c : p.x) c = d(rng);
    return p;
}

} // namespace

TEST_CASE("pardist matches its definition") {
    CHECK(pardist(make_point(0, {0.0}), make_point(0, {0.0})) == 0.0);
    CHECK(pardist(make_point(1, {0.0, 0.0}), make_point(0, {0.0, 0.0})) == doctest::Approx(1.0));
    CHECK(pardist(make_point(0, {3.0, 4.0}), make_point(0, {0.0, 0.0})) == doctest::Approx(5.0));
    CHECK_THROWS_AS(pardist(make_point(0, {1.0}), make_point(0, {1.0, 2.0})),
                    std::invalid_argument);
}

TEST_CASE("pardist is a metric on random triples") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const Point a = rand_point(rng, 3), b = rand_point(rng, 3), c = rand_point(rng, 3);
        CHECK(pardist(a, b) == doctest::Approx(pardist(b, a)));
        CHECK(pardist(a, a) == 0.0);
        CHECK(pardist(a, c) <= pardist(a, b) + pardist(b, c) + 1e-12);
    }
}

TEST_CASE("pardist_to_set handles membership and the empty set") {
    std::vector<Point> set{make_point(0, {1.0, 0.0})};
    CHECK(pardist_to_set(make_point(0, {1.0, 0.0}), set) == 0.0);
    CHECK(pardist_to_set(make_point(0, {0.0, 0.0}), set) == doctest::Approx(1.0));
    CHECK(pardist_to_set(make_point(0, {0.0, 0.0}), std::span<const Point>{}) == kInfiniteDistance);
    CHECK(std::isinf(pardist_to_set(make_point(0, {0.0, 0.0}), std::span<const Point>{})));
}

TEST_CASE("cylinder membership and parabolic boundary") {
    CylinderSpec Q(make_point(0, {0.0, 0.0}), 1.0);
    CHECK(Q.contains(make_point(0, {0.0, 0.0})));
    CHECK_FALSE(Q.on_parabolic_boundary(make_point(0, {0.0, 0.0})));
    CHECK(Q.on_parabolic_boundary(make_point(-1, {0.0, 0.0}))); // bottom disk
    CHECK(Q.on_parabolic_boundary(make_point(0, {1.0, 0.0})));  // lateral shell
    CHECK(Q.on_parabolic_boundary(make_point(-1, {1.0, 0.0}))); // bottom corner
    CHECK_FALSE(Q.on_parabolic_boundary(make_point(1, {1.0, 0.0}))); // top edge excluded
    CHECK_FALSE(Q.contains(make_point(0, {1.0, 0.0})));
    CHECK_FALSE(Q.contains(make_point(-1, {0.0, 0.0})));

    SUBCASE("full = negative or positive or center slice") {
        std::mt19937 rng(5);
        for (int trial = 0; trial < 500; ++trial) {
            const Point p = rand_point(rng, 2);
            const bool full = Q.contains(p);
            const bool neg = Q.negative_part().contains(p);
            const bool pos = Q.positive_part().contains(p);
            const bool slice = p.t == 0.0 && Q.spatial_dist(p) < Q.radius;
            CHECK(full == (neg || pos || slice));
        }
    }
}

TEST_CASE("finite differences are exact on low-order polynomials") {
    const GridSpec g = small_grid(2, 8, 8);
    SUBCASE("linear field has exact gradient") {
        const ScalarField u = sample(g, [](const Point& p) { return p.x[0]; });
        const int idx[2] = {3, 4};
        auto grad = gradient(u, 2, idx);
        CHECK(grad[0] == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(grad[1] == doctest::Approx(0.0).epsilon(1e-13));
    }
    SUBCASE("linear-in-time field has exact time derivative") {
        const ScalarField u = sample(g, [](const Point& p) { return p.t; });
        const int idx[2] = {3, 4};
        CHECK(time_derivative(u, 3, idx) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(time_derivative(u, 0, idx) == doctest::Approx(1.0).epsilon(1e-13)); // one-sided
    }
    SUBCASE("|x|^2 has laplacian 2n") {
        const ScalarField u = sample(g, [](const Point& p) {
            return p.x[0] * p.x[0] + p.x[1] * p.x[1];
        });
        const int idx[2] = {3, 4};
        CHECK(laplacian(u, 1, idx) == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("general quadratic-in-space linear-in-time field") {
        std::mt19937 rng(23);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        const double c0 = d(rng), c1 = d(rng), c2 = d(rng), q11 = d(rng), q22 = d(rng),
                     q12 = d(rng), ct = d(rng);
        const ScalarField u = sample(g, [&](const Point& p) {
            return c0 + c1 * p.x[0] + c2 * p.x[1] + q11 * p.x[0] * p.x[0] +
                   q22 * p.x[1] * p.x[1] + q12 * p.x[0] * p.x[1] + ct * p.t;
        });
        std::vector<int> idx(2);
        for (int k = 1; k < g.nt(); k += 3)
            for (idx[0] = 1; idx[0] < g.nx(0) - 1; idx[0] += 2)
                for (idx[1] = 1; idx[1] < g.nx(1) - 1; idx[1] += 2) {
                    const Point p = g.point(k, idx);
                    auto grad = gradient(u, k, idx);
                    CHECK(grad[0] ==
                          doctest::Approx(c1 + 2 * q11 * p.x[0] + q12 * p.x[1]).epsilon(1e-11));
                    CHECK(grad[1] ==
                          doctest::Approx(c2 + 2 * q22 * p.x[1] + q12 * p.x[0]).epsilon(1e-11));
                    CHECK(laplacian(u, k, idx) ==
                          doctest::Approx(2 * q11 + 2 * q22).epsilon(1e-10));
                    CHECK(time_derivative(u, k, idx) == doctest::Approx(ct).epsilon(1e-11));
                }
    }
    SUBCASE("stencil errors on degenerate grids") {
        GridSpec tiny({{-1.0, 1.0}}, 2.0, {0.0, 1.0}, 1.0); // 2 nodes per axis
        const ScalarField u(tiny, 0.0);
        const int idx[1] = {0};
        CHECK_THROWS_AS(laplacian(u, 0, idx), std::invalid_argument);
    }
}

TEST_CASE("grid extents must tile exactly") {
    CHECK_THROWS_AS(GridSpec({{0.0, 1.0}}, 0.3, {0.0, 1.0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec({{0.0, 1.0}}, 0.5, {0.0, 1.0}, 0.3), std::invalid_argument);
    CHECK_NOTHROW(GridSpec({{0.0, 1.0}}, 0.25, {0.0, 1.0}, 0.125));
}

TEST_CASE("scalar field rejects non-finite values") {
    const GridSpec g = small_grid(1, 4, 4);
    std::vector<double> vals(g.node_count(), 1.0);
    vals[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ScalarField(g, vals), std::invalid_argument);
}

TEST_CASE("field CSV round trip is bit-exact") {
    const GridSpec g = small_grid(2, 4, 4);
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    ScalarField u(g);
    for (auto& v : u.values) v = d(rng);

    const std::string csv = field_to_csv(u);
    std::istringstream in(csv);
    const ScalarField back = field_from_csv(in);
    REQUIRE(back.values.size() == u.values.size());
    for (std::size_t i = 0; i < u.values.size(); ++i) CHECK(back.values[i] == u.values[i]);
    CHECK(field_to_csv(back) == csv);
}

TEST_CASE("field CSV reader rejects malformed node sets") {
    const GridSpec g = small_grid(1, 4, 2);
    const ScalarField u(g, 1.0);
    const std::string csv = field_to_csv(u);

    SUBCASE("missing row") {
        std::string broken = csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1);
        std::istringstream in(broken);
        CHECK_THROWS(field_from_csv(in));
    }
    SUBCASE("perturbed coordinate breaks uniform tiling") {
        std::string broken = csv;
        const auto pos = broken.find(",-0.5,");
        REQUIRE(pos != std::string::npos);
        broken.replace(pos, 6, ",-0.47,");
        std::istringstream in(broken);
        CHECK_THROWS(field_from_csv(in));
    }
    SUBCASE("bad header") {
        std::istringstream in(std::string("a,b,c\n") + "0,0,0\n");
        CHECK_THROWS(field_from_csv(in));
    }
    SUBCASE("garbage number") {
        std::string broken = csv;
        broken.replace(broken.rfind('\n', csv.size() - 2) + 1, 2, "zz");
        std::istringstream in(broken);
        CHECK_THROWS(field_from_csv(in));
    }
}

TEST_CASE("multilinear interpolation reproduces multilinear fields") {
    const GridSpec g = small_grid(2, 8, 8);
    const ScalarField u = sample(g, [](const Point& p) {
        return 0.5 + p.t * 2.0 + p.x[0] - 3.0 * p.x[1] + 0.25 * p.x[0] * p.x[1];
    });
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(-0.99, 0.99);
    for (int i = 0; i < 100; ++i) {
        Point p = make_point(d(rng), {d(rng), d(rng)});
        const double expect = 0.5 + p.t * 2.0 + p.x[0] - 3.0 * p.x[1] + 0.25 * p.x[0] * p.x[1];
        CHECK(u.interpolate(p) == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK_THROWS_AS(u.interpolate(make_point(0, {1.5, 0.0})), std::out_of_range);
}

#include <doctest.h>

#include "divstat/analyze.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace divstat;
using oracle::pt;

TEST_CASE("sample specifications") {
    const Manifold h = builtin_manifold("half-plane-exp");
    const SampleSpec s = parse_grid("x1:-5:5:3,x2:0.1:10:4", h);
    CHECK(s.grid);
    CHECK(sample_points(h, s).size() == 12);
    CHECK(sample_points(h, s).front() == pt(-5, 0.1));
    CHECK_THROWS(parse_grid("x1:-5:5:3", h));
    CHECK_THROWS(parse_grid("x1:-5:5:3,y:0:1:2", h));
    CHECK_THROWS(parse_grid("x1:-5:5:0,x2:0:1:2", h));
    // Nodes outside the chart are dropped.
    CHECK(sample_points(h, parse_grid("x1:0:0:1,x2:-1:1:3", h)).size() == 1);

    const SampleSpec r = random_spec(17, 42);
    const auto pts = sample_points(h, r);
    CHECK(pts.size() == 17);
    CHECK(pts == sample_points(h, r));
}

TEST_CASE("Hadamard scans") {
    const Manifold h = builtin_manifold("half-plane-exp");
    const SampleSpec one = parse_grid("x1:0:0:1,x2:1:1:1", h);
    const ScanReport r2 = hadamard2d_scan(h, one);
    REQUIRE(r2.checks.size() >= 1);
    CHECK(r2.checks.front().worst == doctest::Approx(-2.232544).epsilon(1e-6));
    CHECK(r2.pass());

    const Manifold p = builtin_manifold("paraboloid");
    const SampleSpec origin = parse_grid("x1:0:0:1,x2:0:0:1", p);
    const ScanReport rp = hadamard_scan(p, origin);
    CHECK_FALSE(rp.pass());
    CHECK(rp.checks.front().worst == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(hadamard2d_scan(p, origin).checks.front().worst == doctest::Approx(4.0).epsilon(1e-10));

    const Manifold e = builtin_manifold("euclidean");
    const ScanReport re = hadamard_scan(e, random_spec(20, 42));
    CHECK(re.pass());
    CHECK(re.checks.front().worst == 0.0);

    const ScanReport grid = hadamard_scan(h, parse_grid("x1:-5:5:10,x2:0.1:10:10", h));
    CHECK(grid.pass());
    CHECK(grid.checks.front().worst < 0.0);
}

TEST_CASE("sigma bounds") {
    const Manifold h = builtin_manifold("half-plane-exp");
    const SigmaBounds b = sigma_bounds_scan(h, random_spec(100, 42));
    CHECK(b.min > 0.0);
    CHECK(b.max < 1.0);
    CHECK(SigmaBounds::heuristic);

    const Manifold e = builtin_manifold("euclidean");
    const SigmaBounds z = sigma_bounds_scan(e, random_spec(10, 42));
    CHECK(z.min == 0.0);
    CHECK(z.max == 0.0);

    // The punctured-plane potential is unbounded below near the origin.
    const Manifold m = builtin_manifold("punctured-plane");
    const SigmaBounds coarse = sigma_bounds_scan(m, parse_grid("x1:0.5:1:2,x2:0:0:1", m));
    const SigmaBounds fine = sigma_bounds_scan(m, parse_grid("x1:0.05:1:2,x2:0:0:1", m));
    CHECK(coarse.max <= 0.0);
    CHECK(fine.min < coarse.min - 100);
}

TEST_CASE("check suite") {
    const ScanReport p = check_suite(builtin_manifold("paraboloid"));
    CHECK(p.pass());
    REQUIRE(p.find("constant_curvature_lambda") != nullptr);
    CHECK(p.find("constant_curvature_lambda")->worst == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(p.find("conjugate_symmetry")->worst < 1e-9);

    const ScanReport e = check_suite(builtin_manifold("euclidean"));
    CHECK(e.pass());
    CHECK(std::fabs(e.find("constant_curvature_lambda")->worst) < 1e-12);

    const ScanReport h = check_suite(builtin_manifold("half-plane-exp"));
    CHECK(h.pass());
    CHECK(h.find("conjugate_symmetry")->reported_only);
    CHECK(h.find("conjugate_symmetry")->worst > 0.1);

    CHECK(check_suite(builtin_manifold("punctured-plane")).pass());
    CHECK(p.find("nosuch") == nullptr);
}

#include <doctest.h>

#include "divstat/connect.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace divstat;
using oracle::pt;

namespace {

// Great-circle distance on the unit sphere seen through stereographic
// coordinates, which is what e^sigma g is for the paraboloid.
double sphere_distance(const Coord& p, const Coord& q) {
    auto lift = [](const Coord& x) {
        const double r2 = x.squaredNorm();
        return Eigen::Vector3d(2 * x[0] / (1 + r2), 2 * x[1] / (1 + r2), (r2 - 1) / (1 + r2));
    };
    return std::acos(std::clamp(lift(p).dot(lift(q)), -1.0, 1.0));
}

}  // namespace

TEST_CASE("paraboloid connects along a sphere great circle") {
    const Manifold p = builtin_manifold("paraboloid");
    const ConnectResult r = shoot_connect(p, pt(0, 0), pt(1, 0));
    REQUIRE(r.converged);
    CHECK(r.tilde_length == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
    CHECK(r.endpoint_error < 1e-8);
    CHECK((r.nabla_path.front().x - pt(0, 0)).norm() < 1e-12);
    CHECK((r.nabla_path.back().x - pt(1, 0)).norm() < 1e-8);
    CHECK(geodesic_residual(p, ConnectionKind::Nabla, r.nabla_path) < 1e-6);
    CHECK(hausdorff(r.nabla_path, r.tilde_path) < 1e-7);

    std::mt19937_64 rng(42);
    ShootOpts o;
    o.multistart = 4;
    for (int k = 0; k < 5; ++k) {
        const Coord a = p.sample_point(rng), b = p.sample_point(rng);
        CHECK(distance_tilde(p, a, b, o) == doctest::Approx(sphere_distance(a, b)).epsilon(1e-8));
    }
}

TEST_CASE("distance on the conjugate paraboloid is Euclidean") {
    const Manifold c = builtin_manifold("paraboloid").conjugate();
    CHECK(distance_tilde(c, pt(0, 0), pt(3, 4)) == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(distance_tilde(c, pt(0.5, 0.5), pt(0.5, 0.5)) == 0.0);
    const DistanceReport d = distance_tilde_report(c, pt(-1, 2), pt(2, -2));
    CHECK(d.forward == doctest::Approx(5.0).epsilon(1e-10));
    CHECK(d.asymmetry < 1e-9);
}

TEST_CASE("punctured plane is not geodesically connected") {
    const Manifold m = builtin_manifold("punctured-plane");
    ShootOpts o;
    o.multistart = 4;
    const ConnectResult r = shoot_connect(m, pt(1, 0), pt(-1, 0), o);
    CHECK_FALSE(r.converged);
    CHECK(r.endpoint_error > 1e-3);
    CHECK_THROWS_AS(distance_tilde(m, pt(1, 0), pt(-1, 0), o), NoConvergence);

    const ConnectResult s = shoot_connect(m, pt(1, 0), pt(0.3, 1.5), o);
    CHECK(s.converged);
    CHECK(s.endpoint_error < 1e-8);
}

TEST_CASE("contrast function") {
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        std::mt19937_64 rng(42);
        const Coord x = m.sample_point(rng);
        CHECK(contrast(m, x, x) == 0.0);
    }
    const Manifold p = builtin_manifold("paraboloid");
    CHECK(contrast(p, pt(0, 0), pt(1, 0)) == doctest::Approx(std::numbers::pi * std::numbers::pi / 8).epsilon(1e-8));
    CHECK(contrast(p.conjugate(), pt(0, 0), pt(1, 0)) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("contrast derivatives on the diagonal") {
    ShootOpts o;
    o.multistart = 1;
    const ContrastCheck e = contrast_structure_check(builtin_manifold("euclidean"), pt(0, 0), 1e-3, o);
    CHECK(e.nabla_deviation < 1e-5);
    // rho = d^2 has mixed derivative -2 g; rho / 2 reproduces g.
    CHECK(e.g_scale == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(e.g_deviation_half < 1e-5);
    CHECK(e.min_eigenvalue > 0.0);

    const ContrastCheck p = contrast_structure_check(builtin_manifold("paraboloid"), pt(0.3, -0.2), 1e-2, o);
    CHECK(p.g_deviation_half < 5e-3);
    CHECK(p.min_eigenvalue > 0.0);
    CHECK(p.g_scale == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("determinism") {
    const Manifold h = builtin_manifold("half-plane-exp");
    ShootOpts a;
    a.multistart = 6;
    ShootOpts b = a;
    b.parallel = false;
    const ConnectResult r1 = shoot_connect(h, pt(-1, 0.5), pt(1.5, 2), a);
    const ConnectResult r2 = shoot_connect(h, pt(-1, 0.5), pt(1.5, 2), a);
    const ConnectResult r3 = shoot_connect(h, pt(-1, 0.5), pt(1.5, 2), b);
    REQUIRE(r1.converged);
    for (const ConnectResult* r : {&r2, &r3}) {
        CHECK(r->tilde_length == r1.tilde_length);
        CHECK(r->endpoint_error == r1.endpoint_error);
        CHECK(r->tilde_velocity == r1.tilde_velocity);
        CHECK(r->solutions.size() == r1.solutions.size());
        REQUIRE(r->nabla_path.samples.size() == r1.nabla_path.samples.size());
        for (std::size_t i = 0; i < r1.nabla_path.samples.size(); ++i)
            CHECK(r->nabla_path.samples[i].x == r1.nabla_path.samples[i].x);
    }
}

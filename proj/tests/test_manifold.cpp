#include <doctest.h>

#include "divstat/manifold.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace divstat;
using oracle::pt;

namespace {

// Metrics written out by hand, independent of the expression engine.
Matrix paraboloid_g(const Coord& x) {
    return 2.0 / (x.squaredNorm() + 1.0) * Matrix::Identity(2, 2);
}
Matrix halfplane_g(const Coord& x) { return 1.0 / (x[1] * x[1]) * Matrix::Identity(2, 2); }

const char* kTilted = R"json({
  "name": "tilted", "dim": 2, "coords": ["u", "v"],
  "metric": [["2 + u^2", "u*v/4"], ["", "1 + v^2"]],
  "sigma": "u*v + sin(u)",
  "sample_box": [[-1, 1], [-1, 1]]
})json";

}  // namespace

TEST_CASE("built-in definitions") {
    const Manifold p = builtin_manifold("paraboloid");
    CHECK(p.dim() == 2);
    CHECK(p.sigma(pt(0, 0)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const Manifold pp = builtin_manifold("punctured-plane");
    CHECK_FALSE(pp.in_domain(pt(0, 0)));
    CHECK(pp.in_domain(pt(1e-3, 0)));
    CHECK(pp.sigma(pt(1, 1)) == doctest::Approx(-1.0));
    const Manifold h = builtin_manifold("half-plane-exp");
    CHECK_FALSE(h.in_domain(pt(0, -1)));
    CHECK_THROWS_AS(h.sigma(pt(0, -1)), OutOfDomain);
    CHECK_THROWS_AS(builtin_manifold("nosuch"), ManifoldError);
    CHECK_THROWS_AS(resolve_manifold("nosuch"), ManifoldError);
    CHECK(builtin_names().size() == 4);
}

TEST_CASE("metric values") {
    const Manifold p = builtin_manifold("paraboloid");
    CHECK((p.metric(pt(1, 0)) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((p.metric(pt(0, 0)) - 2 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((p.metric_inverse(pt(0, 0)) - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
    const Manifold h = builtin_manifold("half-plane-exp");
    CHECK((h.metric(pt(0, 2)) - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Levi-Civita coefficients") {
    const Manifold p = builtin_manifold("paraboloid");
    CHECK(christoffel_g(p, pt(0, 0)).data() == std::vector<double>(8, 0.0));
    const Manifold e = builtin_manifold("euclidean");
    CHECK(christoffel_g(e, pt(0.3, -1.2)).data() == std::vector<double>(8, 0.0));

    // Hyperbolic half-plane: Gamma^2_11 = 1/y, Gamma^1_12 = Gamma^2_22 = -1/y.
    const Manifold h = builtin_manifold("half-plane-exp");
    const Tensor3 G = christoffel_g(h, pt(0.5, 1));
    CHECK(G(1, 0, 0) == doctest::Approx(1.0));
    CHECK(G(0, 0, 1) == doctest::Approx(-1.0));
    CHECK(G(0, 1, 0) == doctest::Approx(-1.0));
    CHECK(G(1, 1, 1) == doctest::Approx(-1.0));
    CHECK(std::fabs(G(0, 0, 0)) < 1e-15);

    // Finite-difference oracle at random points.
    std::mt19937_64 rng(42);
    for (int k = 0; k < 20; ++k) {
        const Coord x = p.sample_point(rng);
        CHECK(oracle::max_diff(christoffel_g(p, x), oracle::christoffel(paraboloid_g, x)) < 1e-9);
        const Coord y = h.sample_point(rng);
        CHECK(oracle::max_diff(christoffel_g(h, y), oracle::christoffel(halfplane_g, y)) < 1e-7);
    }
}

TEST_CASE("potential derivatives") {
    const Manifold p = builtin_manifold("paraboloid");
    const FrameVec gs = grad_sigma(p, pt(1, 0));
    CHECK(gs.components[0] == doctest::Approx(-1.0));
    CHECK(std::fabs(gs.components[1]) < 1e-15);
    const Matrix H = hess_sigma(p, pt(1, 0));
    CHECK((H - (-0.5) * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(laplace_sigma(p, pt(0, 0)) == doctest::Approx(-2.0));

    const Manifold h = builtin_manifold("half-plane-exp");
    CHECK(laplace_sigma(h, pt(0, 1)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    // Delta sigma = y^2 e^{-y} in general.
    CHECK(laplace_sigma(h, pt(3, 2)) == doctest::Approx(4 * std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("JSON definitions") {
    const Manifold t = load_manifold_json(kTilted);
    CHECK(t.name() == "tilted");
    CHECK(t.metric(pt(2, 0))(0, 0) == doctest::Approx(6.0));
    CHECK(t.metric(pt(2, 4))(1, 0) == doctest::Approx(2.0));
    CHECK(load_manifold_json(R"("paraboloid")").name() == "paraboloid");
    CHECK(load_manifold_json(R"({"builtin": "euclidean"})").name() == "euclidean");

    CHECK_THROWS_AS(load_manifold_json(R"({"dim":2,"coords":["x1","x2"],"metric":[["1","0"],["0","-1"]],"sigma":"0"})"),
                    ManifoldError);
    CHECK_THROWS_AS(load_manifold_json(R"({"dim":2,"coords":["x1","x2"],"metric":[["1","x1"],["0","1"]],"sigma":"0"})"),
                    ManifoldError);
    CHECK_THROWS_AS(load_manifold_json(R"({"dim":2,"coords":["x1"],"metric":[["1","0"],["0","1"]],"sigma":"0"})"),
                    ManifoldError);
    CHECK_THROWS_AS(load_manifold_json(R"({"dim":2,"coords":["x1","x2"],"metric":[["1","0"],["0","1"]],"sigma":"log("})"),
                    ManifoldError);
    CHECK_THROWS_AS(load_manifold_json("{not json"), ManifoldError);
}

TEST_CASE("property: metric compatibility and orthonormal frames") {
    std::mt19937_64 rng(42);
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 25; ++k) {
            const Coord x = m.sample_point(rng);
            const LocalJet j = m.jet(x, true);
            CHECK(metric_compatibility_residual(j) < 1e-9 * std::max(1.0, j.g.cwiseAbs().maxCoeff()));
            const Matrix E = orthonormal_frame(j.g);
            CHECK((E.transpose() * j.g * E - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    const Manifold t = load_manifold_json(kTilted);
    const Coord x = pt(0.4, -0.3);
    const oracle::MetricFn g = [&](const Coord& y) { return t.metric(y); };
    CHECK(oracle::max_diff(christoffel_g(t, x), oracle::christoffel(g, x)) < 1e-9);
}

TEST_CASE("conjugate flips the potential") {
    const Manifold p = builtin_manifold("paraboloid");
    const Manifold c = p.conjugate();
    CHECK(c.sigma(pt(0.3, 0.2)) == doctest::Approx(-p.sigma(pt(0.3, 0.2))));
    CHECK(c.conjugate().sigma(pt(0.3, 0.2)) == doctest::Approx(p.sigma(pt(0.3, 0.2))));
    CHECK((c.metric(pt(0.3, 0.2)) - p.metric(pt(0.3, 0.2))).cwiseAbs().maxCoeff() == 0.0);
}

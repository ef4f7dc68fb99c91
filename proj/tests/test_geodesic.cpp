#include <doctest.h>

#include "divstat/geodesic.hpp"
#include "divstat/ode.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace divstat;
using oracle::pt;

TEST_CASE("Dopri5 on a harmonic oscillator") {
    Dopri5::Options o;
    o.rtol = 1e-10;
    o.atol = 1e-12;
    o.stops = {1.0, 2.0};
    Dopri5 ode([](const Vector& y, Vector& dy) { dy = Vector{{y[1], -y[0]}}; }, [](const Vector&) { return true; }, o);
    std::vector<double> landed;
    double dense_err = 0.0;
    const auto r = ode.integrate(Vector{{0.0, 1.0}}, 3.0, [&](const DenseStep& d) {
        landed.push_back(d.t1());
        const double tm = d.t0 + 0.37 * d.h;
        dense_err = std::max(dense_err, std::fabs(d(tm)[0] - std::sin(tm)));
    });
    CHECK(dense_err < 1e-8);
    CHECK(r.status == Dopri5::Status::Completed);
    CHECK(r.t_end == 3.0);
    CHECK(r.y_end[0] == doctest::Approx(std::sin(3.0)).epsilon(1e-9));
    CHECK(std::find(landed.begin(), landed.end(), 1.0) != landed.end());
    CHECK(std::find(landed.begin(), landed.end(), 2.0) != landed.end());
}

TEST_CASE("straight lines in the Euclidean plane") {
    const Manifold e = builtin_manifold("euclidean");
    const GeodesicPath path = integrate_geodesic(e, ConnectionKind::LeviCivita, pt(0, 0), pt(1, 0), 1.0);
    CHECK(path.status == PathStatus::Completed);
    CHECK(path.samples.size() == 201);
    CHECK((path.back().x - pt(1, 0)).norm() < 1e-14);
    CHECK(geodesic_residual(e, ConnectionKind::LeviCivita, path) < 1e-12);
    CHECK((exp_map(e, ConnectionKind::Nabla, pt(0, 0), pt(1, 2)) - pt(1, 2)).norm() < 1e-14);
}

TEST_CASE("exp of the zero vector") {
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        std::mt19937_64 rng(42);
        const Coord p = m.sample_point(rng);
        CHECK(exp_map(m, ConnectionKind::Nabla, p, Vector::Zero(2)) == p);
    }
    const Manifold c = builtin_manifold("paraboloid").conjugate();
    CHECK((exp_map(c, ConnectionKind::LeviCivitaTilde, pt(0, 0), pt(1, 0)) - pt(1, 0)).norm() < 1e-12);
}

TEST_CASE("leaving the chart is a terminal status") {
    const Manifold e = load_manifold_json(
        R"({"dim":2,"coords":["x1","x2"],"domain":"x1 < 2","metric":[["1","0"],["0","1"]],"sigma":"0",)"
        R"("sample_box":[[-1,1],[-1,1]]})");
    const GeodesicPath path = integrate_geodesic(e, ConnectionKind::LeviCivita, pt(0, 0), pt(1, 0), 5.0);
    CHECK(path.status == PathStatus::ExitedDomain);
    CHECK(path.exit_parameter == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(path.back().t == path.exit_parameter);
    try {
        exp_map(e, ConnectionKind::LeviCivita, pt(0, 0), pt(5, 0));
        FAIL("expected GeodesicError");
    } catch (const GeodesicError& err) {
        CHECK(err.status() == PathStatus::ExitedDomain);
        CHECK(err.parameter() == doctest::Approx(0.4).epsilon(1e-9));
    }
    IntegratorOpts o;
    o.max_steps = 3;
    const Manifold p = builtin_manifold("paraboloid");
    CHECK(integrate_geodesic(p, ConnectionKind::Nabla, pt(0, 0), pt(1, 0), 1.0, o).status == PathStatus::StepLimit);
}

TEST_CASE("punctured plane: Nabla geodesics are straight lines") {
    const Manifold m = builtin_manifold("punctured-plane");
    const GeodesicPath path = integrate_geodesic(m, ConnectionKind::Nabla, pt(1, 0), pt(0, 1), 50.0);
    for (const auto& s : path.samples) CHECK(std::fabs(s.x[0] - 1.0) < 1e-6);

    std::mt19937_64 rng(42);
    for (int k = 0; k < 10; ++k) {
        const Coord p = m.sample_point(rng);
        const Vector v = pt(std::cos(k), std::sin(k));
        const GeodesicPath g = integrate_geodesic(m, ConnectionKind::Nabla, p, v, 0.5);
        for (const auto& s : g.samples) {
            const Vector d = s.x - p;
            CHECK(std::fabs(d[0] * v[1] - d[1] * v[0]) < 1e-6);
        }
    }
}

TEST_CASE("reparametrization") {
    const Manifold p = builtin_manifold("paraboloid");
    const GeodesicPath nab = integrate_geodesic(p, ConnectionKind::Nabla, pt(0, 0), pt(1, 0), 0.5);
    CHECK(geodesic_residual(p, ConnectionKind::Nabla, nab) < 1e-7);
    const GeodesicPath til = reparam_to_tilde(p, nab);
    CHECK(til.kind == ConnectionKind::LeviCivitaTilde);
    CHECK(geodesic_residual(p, ConnectionKind::LeviCivitaTilde, til) < 1e-6);
    CHECK(hausdorff(nab, til) < 1e-12);
    const GeodesicPath back = reparam_from_tilde(p, til);
    for (std::size_t i = 0; i < nab.samples.size(); ++i) CHECK(std::fabs(back.samples[i].t - nab.samples[i].t) < 1e-8);
    CHECK_THROWS(reparam_to_tilde(p, til));

    // sigma == 0: the identity.
    const Manifold e = builtin_manifold("euclidean");
    const GeodesicPath line = integrate_geodesic(e, ConnectionKind::Nabla, pt(0, 0), pt(1, 1), 1.0);
    const GeodesicPath same = reparam_to_tilde(e, line);
    for (std::size_t i = 0; i < line.samples.size(); ++i) {
        CHECK(same.samples[i].t == doctest::Approx(line.samples[i].t).epsilon(1e-14));
        CHECK((same.samples[i].v - line.samples[i].v).norm() < 1e-14);
    }

    // sigma == c: s = e^{2c} t.
    const Manifold cm = load_manifold_json(
        R"({"dim":2,"coords":["x1","x2"],"metric":[["1","0"],["0","1"]],"sigma":"0.3","sample_box":[[-1,1],[-1,1]]})");
    const GeodesicPath cl = integrate_geodesic(cm, ConnectionKind::Nabla, pt(0, 0), pt(1, 0), 1.0);
    const GeodesicPath cs = reparam_to_tilde(cm, cl);
    CHECK(cs.back().t == doctest::Approx(std::exp(0.6)).epsilon(1e-13));

    // Conjugate paraboloid: a straight segment of the Euclidean e^sigma g is a NablaBar-geodesic image.
    const Manifold c = p.conjugate();
    const GeodesicPath seg = integrate_geodesic(c, ConnectionKind::LeviCivitaTilde, pt(0, 0), pt(1, 0), 1.0);
    const GeodesicPath bar = reparam_from_tilde(c, seg);
    CHECK(geodesic_residual(c, ConnectionKind::Nabla, bar) < 1e-6);
    for (const auto& s : bar.samples) CHECK(std::fabs(s.x[1]) < 1e-14);
}

TEST_CASE("residual detects perturbed paths") {
    const Manifold p = builtin_manifold("paraboloid");
    GeodesicPath path = integrate_geodesic(p, ConnectionKind::Nabla, pt(0.2, 0.1), pt(0.5, 0.7), 1.0);
    CHECK(geodesic_residual(p, ConnectionKind::Nabla, path) < 1e-7);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    for (auto& s : path.samples) s.x += pt(u(rng), u(rng));
    CHECK(geodesic_residual(p, ConnectionKind::Nabla, path) > 1e-3);
}

TEST_CASE("csv output") {
    const Manifold e = builtin_manifold("euclidean");
    IntegratorOpts o;
    o.samples = 2;
    std::ostringstream os;
    write_csv(os, integrate_geodesic(e, ConnectionKind::LeviCivita, pt(0, 0), pt(1, 0), 1.0, o));
    const std::string s = os.str();
    CHECK(s.rfind("t,x1,x2,v1,v2\n", 0) == 0);
    CHECK(s.find("# status=completed") != std::string::npos);
    CHECK(std::count(s.begin(), s.end(), '\n') == 5);
}

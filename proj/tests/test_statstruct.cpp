#include <doctest.h>

#include "divstat/statstruct.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace divstat;
using oracle::pt;

namespace {

// K^k_ij written out for a conformally flat metric, where g_ij grad^k sigma
// reduces to delta_ij d_k sigma.
Tensor3 conformal_K(double s1, double s2) {
    const double ds[2] = {s1, s2};
    Tensor3 K(2);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                K(k, i, j) = -0.5 * (ds[i] * (k == j) + ds[j] * (k == i) + (i == j) * ds[k]);
    return K;
}

}  // namespace

TEST_CASE("difference tensor and cubic form values") {
    const Manifold p = builtin_manifold("paraboloid");
    CHECK(difference_tensor(p, pt(0, 0)).data() == std::vector<double>(8, 0.0));
    CHECK(cubic_form(p, pt(0, 0)).data() == std::vector<double>(8, 0.0));
    const Tensor3 K = difference_tensor(p, pt(1, 0));
    CHECK(K(0, 0, 0) == doctest::Approx(1.5));
    const Tensor3 C = cubic_form(p, pt(1, 0));
    CHECK(C(0, 0, 0) == doctest::Approx(-3.0));
    CHECK(C(0, 1, 1) == doctest::Approx(-1.0));
    CHECK(std::fabs(C(1, 1, 1)) < 1e-15);

    const Manifold e = builtin_manifold("euclidean");
    CHECK(difference_tensor(e, pt(0.7, 0.1)).data() == std::vector<double>(8, 0.0));

    // Against the closed-form conformal expression at random points.
    std::mt19937_64 rng(42);
    for (int k = 0; k < 20; ++k) {
        const Coord x = p.sample_point(rng);
        const double r2 = x.squaredNorm();
        const Tensor3 ref = conformal_K(-2 * x[0] / (r2 + 1), -2 * x[1] / (r2 + 1));
        CHECK(oracle::max_diff(difference_tensor(p, x), ref) < 1e-13);
    }
}

TEST_CASE("connection coefficients of the paraboloid") {
    const Manifold p = builtin_manifold("paraboloid");
    const Coord x = pt(1, 0);
    CHECK(connection_coeffs(p, x, ConnectionKind::Nabla)(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(connection_coeffs(p, x, ConnectionKind::NablaBar)(0, 0, 0) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(connection_coeffs(p, x, ConnectionKind::LeviCivita)(0, 0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(connection_coeffs(p, x, ConnectionKind::LeviCivitaTilde)(0, 0, 0) == doctest::Approx(-1.0).epsilon(1e-12));

    // Nabla_{d_i} d_j = 2 delta_ij / (r^2+1) (x1 d1 + x2 d2) everywhere.
    std::mt19937_64 rng(42);
    for (int k = 0; k < 20; ++k) {
        const Coord y = p.sample_point(rng);
        const Tensor3 G = connection_coeffs(p, y, ConnectionKind::Nabla);
        const Tensor3 Gb = connection_coeffs(p, y, ConnectionKind::NablaBar);
        const double c = 2 / (y.squaredNorm() + 1);
        for (std::size_t kk = 0; kk < 2; ++kk)
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) {
                    CHECK(G(kk, i, j) == doctest::Approx(c * (i == j) * y[kk]).epsilon(1e-12));
                    const double bar = -c * (y[i] * (j == kk) + y[j] * (i == kk));
                    CHECK(Gb(kk, i, j) == doctest::Approx(bar).epsilon(1e-12));
                }
    }
}

TEST_CASE("conjugate structure") {
    const Manifold p = builtin_manifold("paraboloid");
    const Manifold c = p.conjugate();
    std::mt19937_64 rng(42);
    for (int k = 0; k < 20; ++k) {
        const Coord x = p.sample_point(rng);
        CHECK(oracle::max_diff(connection_coeffs(c, x, ConnectionKind::Nabla),
                               connection_coeffs(p, x, ConnectionKind::NablaBar)) < 1e-14);
        CHECK(oracle::max_diff(connection_coeffs(c.conjugate(), x, ConnectionKind::Nabla),
                               connection_coeffs(p, x, ConnectionKind::Nabla)) == 0.0);
        // e^{-sigma} g of the paraboloid is Euclidean: its Levi-Civita connection vanishes.
        const Tensor3 T = connection_coeffs(c, x, ConnectionKind::LeviCivitaTilde);
        for (double v : T.data()) CHECK(std::fabs(v) < 1e-13);
        const LocalJet j = c.jet(x, false);
        CHECK((std::exp(j.sigma) * j.g - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("volume density and trace") {
    const Manifold p = builtin_manifold("paraboloid");
    CHECK(volume_density(p, pt(0, 0)) == doctest::Approx(0.5));
    const Manifold e = builtin_manifold("euclidean");
    CHECK(trace_K(e, pt(0.2, 0.4)).cwiseAbs().maxCoeff() == 0.0);
    const Manifold h = builtin_manifold("half-plane-exp");
    const Vector t = trace_K(h, pt(0, 1));
    CHECK(std::fabs(t[0]) < 1e-15);
    CHECK(t[1] == doctest::Approx(2 * std::exp(-1.0)).epsilon(1e-13));

    std::mt19937_64 rng(42);
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 100; ++k) {
            const Coord x = m.sample_point(rng);
            const LocalJet j = m.jet(x, false);
            const double scale = std::max(1.0, volume_density(j));
            CHECK(parallel_volume_residual(j).cwiseAbs().maxCoeff() < 1e-8 * scale);
        }
    }
}

TEST_CASE("property: exact connection derivative matches finite differences") {
    std::mt19937_64 rng(42);
    const ConnectionKind kinds[] = {ConnectionKind::LeviCivita, ConnectionKind::Nabla, ConnectionKind::NablaBar,
                                    ConnectionKind::LeviCivitaTilde};
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 10; ++k) {
            const Coord x = m.sample_point(rng);
            for (auto kind : kinds) {
                const Tensor4 exact = connection_derivative(m.jet(x, true), kind);
                const double h = 1e-5;
                for (std::size_t d = 0; d < 2; ++d) {
                    Coord a = x, b = x;
                    a[static_cast<Eigen::Index>(d)] += h;
                    b[static_cast<Eigen::Index>(d)] -= h;
                    const Tensor3 Ga = connection_coeffs(m, a, kind), Gb = connection_coeffs(m, b, kind);
                    for (std::size_t q = 0; q < 8; ++q) {
                        const double fd = (Ga.data()[q] - Gb.data()[q]) / (2 * h);
                        const double ex = exact.data()[d * 8 + q];
                        INFO(name << " " << kind_name(kind));
                        CHECK(std::fabs(fd - ex) < 1e-5 * std::max(1.0, std::fabs(ex)));
                    }
                }
            }
        }
    }
}

TEST_CASE("property: structure identities on all built-ins") {
    std::mt19937_64 rng(42);
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 100; ++k) {
            const LocalJet j = m.jet(m.sample_point(rng), true);
            const StructureResiduals r = structure_residuals(j);
            INFO(name);
            CHECK(r.codazzi < 1e-8);
            CHECK(r.cubic_symmetry < 1e-8);
            CHECK(r.duality < 1e-8);
            CHECK(r.conjugate_sum < 1e-8);
            CHECK(r.conformal_lc < 1e-8);
            CHECK(r.projective < 1e-8);
            CHECK(r.cubic_cross_check < 1e-8);
            CHECK(r.trace_identity < 1e-10);
        }
    }
}

TEST_CASE("kind names") {
    CHECK(parse_kind("lc") == ConnectionKind::LeviCivita);
    CHECK(parse_kind("nabla") == ConnectionKind::Nabla);
    CHECK(parse_kind("bar") == ConnectionKind::NablaBar);
    CHECK(parse_kind("lc-tilde") == ConnectionKind::LeviCivitaTilde);
    CHECK_THROWS_AS(parse_kind("x"), std::invalid_argument);
}

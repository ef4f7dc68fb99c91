#include <doctest.h>

#include "divstat/analyze.hpp"
#include "divstat/curvature.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace divstat;
using oracle::pt;

namespace {

const ConnectionKind kKinds[] = {ConnectionKind::LeviCivita, ConnectionKind::Nabla, ConnectionKind::NablaBar,
                                 ConnectionKind::LeviCivitaTilde};

double lower(const Riem& r, const Matrix& g, std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    // g(R(d_i,d_j)d_k, d_l)
    double s = 0.0;
    for (std::size_t m = 0; m < g.rows(); ++m) s += r.R(m, k, i, j) * g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l));
    return s;
}

}  // namespace

TEST_CASE("property: curvature matches finite differences of the connection") {
    std::mt19937_64 rng(42);
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 10; ++k) {
            const Coord x = m.sample_point(rng);
            for (auto kind : kKinds) {
                const Riem r = riemann(m, x, kind);
                const Tensor4 ref = oracle::riemann([&](const Coord& y) { return connection_coeffs(m, y, kind); }, x);
                double scale = 1.0;
                for (double v : ref.data()) scale = std::max(scale, std::fabs(v));
                INFO(name << " " << kind_name(kind));
                CHECK(oracle::max_diff(r.R, ref) < 1e-6 * scale);
            }
        }
    }
}

TEST_CASE("paraboloid has constant curvature 1") {
    const Manifold p = builtin_manifold("paraboloid");
    const Coord x = pt(1, 0);
    const LocalJet j = p.jet(x, true);
    const Riem r = riemann(j, ConnectionKind::Nabla);
    CHECK(lower(r, j.g, 0, 1, 1, 0) == doctest::Approx(j.g.determinant()).epsilon(1e-12));
    CHECK(lower(r, j.g, 0, 1, 1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((ricci(j, ConnectionKind::Nabla) - j.g).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ricci(j, ConnectionKind::NablaBar) - j.g).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ricci(p, pt(0, 0), ConnectionKind::NablaBar) - 2 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(42);
    for (int k = 0; k < 50; ++k) {
        const LocalJet jj = p.jet(p.sample_point(rng), true);
        CHECK(constant_curvature_residual(jj, 1.0) < 1e-8);
        CHECK(constant_curvature_fit(jj) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(conjugate_symmetry_residual(jj) < 1e-9);
        // S = R for a conjugate-symmetric structure.
        CHECK(oracle::max_diff(statistical_curvature(jj).R, riemann(jj, ConnectionKind::Nabla).R) < 1e-10);
        const SectionalTilde st = sectional_tilde(jj, pt(1, 0), pt(0.3, 1));
        CHECK(st.direct == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(st.via_s == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(constant_curvature_residual(p, pt(0, 0), 0.0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(sectional_tilde(p, pt(0, 0), pt(1, 0), pt(0, 1)).via_s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("flat cases vanish") {
    const Manifold e = builtin_manifold("euclidean");
    const LocalJet j = e.jet(pt(0.5, -0.25), true);
    for (auto kind : kKinds) {
        const Riem r = riemann(j, kind);
        for (double v : r.R.data()) CHECK(v == 0.0);
        CHECK(ricci(j, kind).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(constant_curvature_residual(j, 0.0) == 0.0);
    CHECK(conjugate_symmetry_residual(j) == 0.0);
    const SectionalTilde st = sectional_tilde(j, pt(1, 0), pt(0, 1));
    CHECK(st.direct == 0.0);
    CHECK(st.via_s == 0.0);
    CHECK(curvature_relation_residuals(j).max() == 0.0);
}

TEST_CASE("hyperbolic half-plane with exponential potential") {
    const Manifold h = builtin_manifold("half-plane-exp");
    const LocalJet j = h.jet(pt(0, 1), true);
    CHECK(sectional_g(j, pt(1, 0), pt(0, 1)) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(sectional_g(h.jet(pt(2, 0.3), true), pt(1, 1), pt(0, 1)) == doctest::Approx(-1.0).epsilon(1e-12));
    // Hess sigma = diag(e^-1, 0) and (Lap sigma / 2) g = diag(e^-1/2, e^-1/2) at (0,1).
    const Matrix H = hess_sigma(j);
    CHECK(H(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(std::fabs(H(1, 1)) < 1e-15);
    CHECK(conjugate_symmetry_residual(j) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));

    // In dimension 2, g(S(X,Y)Y,X) = k + |d sigma|^2 / 2 for an orthonormal pair.
    const auto [X, Y] = orthonormalize_pair(j.g, pt(1, 0), pt(0, 1));
    const Riem S = statistical_curvature(j);
    const double gS = X.dot(j.g * apply(S, X, Y, Y));
    const double ds2 = std::exp(-2.0);
    CHECK(gS == doctest::Approx(-1.0 + 0.5 * ds2).epsilon(1e-12));
    CHECK(gS == doctest::Approx(-0.932332).epsilon(1e-6));
}

TEST_CASE("property: curvature relations, Bianchi and Ricci symmetry") {
    std::mt19937_64 rng(42);
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 100; ++k) {
            const LocalJet j = m.jet(m.sample_point(rng), true);
            const CurvatureRelations cr = curvature_relation_residuals(j);
            INFO(name);
            CHECK(cr.dual_pairing < 1e-8);
            CHECK(cr.levi_civita_split < 1e-8);
            CHECK(cr.sum_rule < 1e-8);
            CHECK(first_bianchi_residual(riemann(j, ConnectionKind::Nabla)) < 1e-8);
            CHECK(first_bianchi_residual(riemann(j, ConnectionKind::NablaBar)) < 1e-8);
            CHECK(ricci_asymmetry(ricci(j, ConnectionKind::Nabla)) < 1e-9);
            const SectionalTilde st = sectional_tilde(j, pt(1, 0.2), pt(-0.4, 1));
            CHECK(std::fabs(st.direct - st.via_s) < 1e-7 * std::max(1.0, std::fabs(st.direct)));
        }
    }
}

TEST_CASE("closed-form curvature of divisible structures") {
    std::mt19937_64 rng(42);
    for (const auto& name : builtin_names()) {
        const Manifold m = builtin_manifold(name);
        for (int k = 0; k < 20; ++k) {
            const ClosedFormCheck c = closed_form_residuals(m.jet(m.sample_point(rng), true));
            INFO(name);
            CHECK(c.riemann < 1e-8);
            CHECK(c.ricci < 1e-8);
        }
    }
}

TEST_CASE("Hadamard left-hand sides") {
    const Manifold p = builtin_manifold("paraboloid");
    const LocalJet j0 = p.jet(pt(0, 0), true);
    const auto [X, Y] = orthonormalize_pair(j0.g, pt(1, 0), pt(0, 1));
    CHECK(hadamard_lhs(j0, X, Y) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(hadamard2d_lhs(j0) == doctest::Approx(4.0).epsilon(1e-12));

    const Manifold h = builtin_manifold("half-plane-exp");
    const LocalJet j1 = h.jet(pt(0, 1), true);
    CHECK(hadamard2d_lhs(j1) == doctest::Approx(-2.0 + std::exp(-2.0) - std::exp(-1.0)).epsilon(1e-12));
    CHECK(hadamard2d_lhs(j1) == doctest::Approx(-2.232544).epsilon(1e-6));
    // The two forms differ by |d sigma|^2 in dimension 2.
    const auto [U, V] = orthonormalize_pair(j1.g, pt(1, 0), pt(0, 1));
    CHECK(hadamard2d_lhs(j1) - hadamard_lhs(j1, U, V) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

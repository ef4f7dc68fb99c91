#include "divstat/curvature.hpp"

#include <algorithm>
#include <cmath>

namespace divstat {

namespace {

inline Eigen::Index I(std::size_t i) { return static_cast<Eigen::Index>(i); }

// (l,k,i,j) -> g(R(d_i,d_j)d_k, d_l)
Tensor4 lower(const Tensor4& R, const Matrix& g) {
    const std::size_t n = R.dim();
    Tensor4 L(n);
    for (std::size_t w = 0; w < n; ++w)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t l = 0; l < n; ++l) s += g(I(w), I(l)) * R(l, k, i, j);
                    L(w, k, i, j) = s;
                }
    return L;
}

// ([K_i, K_j] d_k)^l
double commutator(const Tensor3& K, std::size_t l, std::size_t k, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t p = 0; p < K.dim(); ++p) s += K(l, i, p) * K(p, j, k) - K(l, j, p) * K(p, i, k);
    return s;
}

}  // namespace

Riem riemann(const LocalJet& J, ConnectionKind kind) {
    const std::size_t n = J.n;
    const Tensor3 G = connection_coeffs(J, kind);
    const Tensor4 D = connection_derivative(J, kind);
    Riem r{kind, Tensor4(n)};
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    double v = D(i, l, j, k) - D(j, l, i, k);
                    for (std::size_t m = 0; m < n; ++m) v += G(l, i, m) * G(m, j, k) - G(l, j, m) * G(m, i, k);
                    r.R(l, k, i, j) = v;
                    r.R(l, k, j, i) = -v;
                }
    return r;
}

Riem riemann(const Manifold& m, const Coord& x, ConnectionKind kind) { return riemann(m.jet(x, true), kind); }

Vector apply(const Riem& r, const Vector& X, const Vector& Y, const Vector& Z) {
    const std::size_t n = r.R.dim();
    Vector out = Vector::Zero(I(n));
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) out[I(l)] += r.R(l, k, i, j) * X[I(i)] * Y[I(j)] * Z[I(k)];
    return out;
}

Matrix ricci(const LocalJet& J, ConnectionKind kind) {
    const std::size_t n = J.n;
    const Riem r = riemann(J, kind);
    const Matrix E = orthonormal_frame(J.g);
    Matrix ric = Matrix::Zero(I(n), I(n));
    for (std::size_t a = 0; a < n; ++a) {
        const Vector e = E.col(I(a));
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q) {
                const Vector v = apply(r, e, Vector::Unit(I(n), I(p)), Vector::Unit(I(n), I(q)));
                ric(I(p), I(q)) += e.dot(J.g * v);
            }
    }
    return ric;
}

Matrix ricci(const Manifold& m, const Coord& x, ConnectionKind kind) { return ricci(m.jet(x, true), kind); }

Riem statistical_curvature(const LocalJet& J) {
    Riem a = riemann(J, ConnectionKind::Nabla);
    const Riem b = riemann(J, ConnectionKind::NablaBar);
    for (std::size_t i = 0; i < a.R.data().size(); ++i) a.R.data()[i] = 0.5 * (a.R.data()[i] + b.R.data()[i]);
    return a;
}

Riem statistical_curvature(const Manifold& m, const Coord& x) { return statistical_curvature(m.jet(x, true)); }

SectionalTilde sectional_tilde(const LocalJet& J, const Vector& X0, const Vector& Y0) {
    const auto [X, Y] = orthonormalize_pair(J.g, X0, Y0);
    const double f = std::exp(J.sigma);
    const Matrix gt = f * J.g;

    SectionalTilde out;
    const Riem rt = riemann(J, ConnectionKind::LeviCivitaTilde);
    const double num = X.dot(gt * apply(rt, X, Y, Y));
    const double den = X.dot(gt * X) * Y.dot(gt * Y) - std::pow(X.dot(gt * Y), 2);
    out.direct = num / den;

    const Riem S = statistical_curvature(J);
    const Matrix H = hess_sigma(J);
    const double dsig2 = J.dsigma.dot(J.ginv * J.dsigma);
    const double sxy = X.dot(J.g * apply(S, X, Y, Y));
    out.via_s = (sxy - 0.5 * (X.dot(H * X) + Y.dot(H * Y) + dsig2)) / f;
    return out;
}

SectionalTilde sectional_tilde(const Manifold& m, const Coord& x, const Vector& X, const Vector& Y) {
    return sectional_tilde(m.jet(x, true), X, Y);
}

double sectional_g(const LocalJet& J, const Vector& X0, const Vector& Y0) {
    const auto [X, Y] = orthonormalize_pair(J.g, X0, Y0);
    const Riem r = riemann(J, ConnectionKind::LeviCivita);
    return X.dot(J.g * apply(r, X, Y, Y));
}

double CurvatureRelations::max() const noexcept { return std::max({dual_pairing, levi_civita_split, sum_rule}); }

Tensor4 covariant_derivative_K(const LocalJet& J) {
    const std::size_t n = J.n;
    const Tensor3 G = christoffel_g(J);
    const Tensor3 K = difference_tensor(J);
    const Tensor4 dK = difference_tensor_derivative(J);
    Tensor4 out(n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double v = dK(m, k, i, j);
                    for (std::size_t p = 0; p < n; ++p)
                        v += G(k, m, p) * K(p, i, j) - G(p, m, i) * K(k, p, j) - G(p, m, j) * K(k, i, p);
                    out(m, k, i, j) = v;
                }
    return out;
}

CurvatureRelations curvature_relation_residuals(const LocalJet& J) {
    const std::size_t n = J.n;
    const Riem R = riemann(J, ConnectionKind::Nabla);
    const Riem Rb = riemann(J, ConnectionKind::NablaBar);
    const Riem Rg = riemann(J, ConnectionKind::LeviCivita);
    const Tensor3 K = difference_tensor(J);
    const Tensor4 nK = covariant_derivative_K(J);
    const Tensor4 lowR = lower(R.R, J.g);
    const Tensor4 lowRb = lower(Rb.R, J.g);

    CurvatureRelations out;
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    // slot names: X=d_i, Y=d_j, Z=d_k, W=d_l
                    out.dual_pairing = std::max(out.dual_pairing, std::fabs(lowR(l, k, i, j) + lowRb(k, l, i, j)));
                    const double comm = commutator(K, l, k, i, j);
                    const double split =
                        R.R(l, k, i, j) - Rg.R(l, k, i, j) - nK(i, l, j, k) + nK(j, l, i, k) - comm;
                    out.levi_civita_split = std::max(out.levi_civita_split, std::fabs(split));
                    const double sum = R.R(l, k, i, j) + Rb.R(l, k, i, j) - 2.0 * Rg.R(l, k, i, j) - 2.0 * comm;
                    out.sum_rule = std::max(out.sum_rule, std::fabs(sum));
                }
    return out;
}

CurvatureRelations curvature_relation_residuals(const Manifold& m, const Coord& x) {
    return curvature_relation_residuals(m.jet(x, true));
}

double conjugate_symmetry_residual(const LocalJet& J) {
    const Matrix H = hess_sigma(J);
    const double lap = J.ginv.cwiseProduct(H).sum();
    return (H - (lap / static_cast<double>(J.n)) * J.g).cwiseAbs().maxCoeff();
}

double conjugate_symmetry_residual(const Manifold& m, const Coord& x) { return conjugate_symmetry_residual(m.jet(x, true)); }

namespace {

double model_term(const Matrix& g, std::size_t l, std::size_t k, std::size_t i, std::size_t j) {
    return g(I(j), I(k)) * g(I(i), I(l)) - g(I(i), I(k)) * g(I(j), I(l));
}

}  // namespace

double constant_curvature_residual(const LocalJet& J, double lambda) {
    const std::size_t n = J.n;
    const Tensor4 L = lower(riemann(J, ConnectionKind::Nabla).R, J.g);
    double worst = 0.0;
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    worst = std::max(worst, std::fabs(L(l, k, i, j) - lambda * model_term(J.g, l, k, i, j)));
    return worst;
}

double constant_curvature_residual(const Manifold& m, const Coord& x, double lambda) {
    return constant_curvature_residual(m.jet(x, true), lambda);
}

double constant_curvature_fit(const LocalJet& J) {
    const std::size_t n = J.n;
    const Tensor4 L = lower(riemann(J, ConnectionKind::Nabla).R, J.g);
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double a = model_term(J.g, l, k, i, j);
                    num += a * L(l, k, i, j);
                    den += a * a;
                }
    return den > 0.0 ? num / den : 0.0;
}

double first_bianchi_residual(const Riem& r) {
    const std::size_t n = r.R.dim();
    double worst = 0.0;
    // R(X,Y)Z + R(Y,Z)X + R(Z,X)Y with X=d_i, Y=d_j, Z=d_k
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    worst = std::max(worst, std::fabs(r.R(l, k, i, j) + r.R(l, i, j, k) + r.R(l, j, k, i)));
    return worst;
}

double ricci_asymmetry(const Matrix& ric) { return (ric - ric.transpose()).cwiseAbs().maxCoeff(); }

ClosedFormCheck closed_form_residuals(const LocalJet& J) {
    const std::size_t n = J.n;
    const double nd = static_cast<double>(n);
    const Matrix H = hess_sigma(J);
    const Vector a = J.dsigma;             // d sigma
    const Vector G = J.ginv * J.dsigma;    // grad sigma
    const double a2 = a.dot(G);
    const double lap = J.ginv.cwiseProduct(H).sum();
    const Riem Rg = riemann(J, ConnectionKind::LeviCivita);
    const Riem R = riemann(J, ConnectionKind::Nabla);
    const Matrix HG = J.ginv * H;  // (nabla^g_X grad sigma)^l = HG(l, x)

    // R(X,Y)Z with X=d_i, Y=d_j, Z=d_k:
    //   R^g - 1/2 (H(X,Z)Y - H(Y,Z)X + g(Y,Z) nabla_X grad - g(X,Z) nabla_Y grad)
    //   + 1/4 (a(Y)a(Z)X - a(X)a(Z)Y)
    //   + 1/4 (g(Y,Z)(|a|^2 X + a(X) grad) - g(X,Z)(|a|^2 Y + a(Y) grad))
    ClosedFormCheck out;
    auto d = [](std::size_t p, std::size_t q) { return p == q ? 1.0 : 0.0; };
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gjk = J.g(I(j), I(k)), gik = J.g(I(i), I(k));
                    const double hess = H(I(i), I(k)) * d(l, j) - H(I(j), I(k)) * d(l, i) + gjk * HG(I(l), I(i)) -
                                        gik * HG(I(l), I(j));
                    const double quad1 = a[I(j)] * a[I(k)] * d(l, i) - a[I(i)] * a[I(k)] * d(l, j);
                    const double quad2 = gjk * (a2 * d(l, i) + a[I(i)] * G[I(l)]) - gik * (a2 * d(l, j) + a[I(j)] * G[I(l)]);
                    const double base = Rg.R(l, k, i, j) + 0.25 * quad1 + 0.25 * quad2;
                    out.riemann = std::max(out.riemann, std::fabs(R.R(l, k, i, j) - (base - 0.5 * hess)));
                    out.riemann_literature =
                        std::max(out.riemann_literature, std::fabs(R.R(l, k, i, j) - (base + 0.5 * hess)));
                }

    // Ric = Ric^g + 1/2 (n Hess - g Lap) + 1/4 ((n-2) a a + n |a|^2 g)
    const Matrix ricg = ricci(J, ConnectionKind::LeviCivita);
    const Matrix ric = ricci(J, ConnectionKind::Nabla);
    const Matrix quad = 0.25 * ((nd - 2.0) * a * a.transpose() + nd * a2 * J.g);
    out.ricci = (ric - (ricg + 0.5 * (nd * H - lap * J.g) + quad)).cwiseAbs().maxCoeff();
    out.ricci_literature = (ric - (ricg + 0.5 * ((nd + 2.0) * H - lap * J.g) + quad)).cwiseAbs().maxCoeff();
    return out;
}

}  // namespace divstat

#include "divstat/statstruct.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace divstat {

namespace {

inline Eigen::Index I(std::size_t i) { return static_cast<Eigen::Index>(i); }
inline double delta(std::size_t a, std::size_t b) { return a == b ? 1.0 : 0.0; }

// d_m Gamma(LC)^k_ij from the jet:
// Gamma^k_ij = g^kl F_lij with F_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij).
Tensor4 christoffel_g_derivative(const LocalJet& J) {
    const std::size_t n = J.n;
    Tensor3 F(n);
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) F(l, i, j) = 0.5 * (J.dg(i, j, l) + J.dg(j, i, l) - J.dg(l, i, j));
    Tensor4 D(n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t l = 0; l < n; ++l) {
                        double dF = 0.5 * (J.ddg(m, i, j, l) + J.ddg(m, j, i, l) - J.ddg(m, l, i, j));
                        s += J.dginv(m, k, l) * F(l, i, j) + J.ginv(I(k), I(l)) * dF;
                    }
                    D(m, k, i, j) = s;
                }
    return D;
}

Tensor3 combine(const Tensor3& a, const Tensor3& b, double sb) {
    Tensor3 r(a.dim());
    for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] = a.data()[i] + sb * b.data()[i];
    return r;
}

Tensor4 combine(const Tensor4& a, const Tensor4& b, double sb) {
    Tensor4 r(a.dim());
    for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] = a.data()[i] + sb * b.data()[i];
    return r;
}

}  // namespace

const char* kind_name(ConnectionKind kind) noexcept {
    switch (kind) {
    case ConnectionKind::LeviCivita: return "lc";
    case ConnectionKind::Nabla: return "nabla";
    case ConnectionKind::NablaBar: return "bar";
    case ConnectionKind::LeviCivitaTilde: return "lc-tilde";
    }
    return "?";
}

ConnectionKind parse_kind(const std::string& text) {
    if (text == "lc") return ConnectionKind::LeviCivita;
    if (text == "nabla") return ConnectionKind::Nabla;
    if (text == "bar") return ConnectionKind::NablaBar;
    if (text == "lc-tilde") return ConnectionKind::LeviCivitaTilde;
    throw std::invalid_argument("unknown connection kind '" + text + "' (expected lc, nabla, bar or lc-tilde)");
}

Tensor3 difference_tensor(const LocalJet& J) {
    const std::size_t n = J.n;
    const Vector grad = J.ginv * J.dsigma;
    Tensor3 K(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                K(k, i, j) = -0.5 * (J.dsigma[I(i)] * delta(k, j) + J.dsigma[I(j)] * delta(k, i) +
                                     J.g(I(i), I(j)) * grad[I(k)]);
    return K;
}

Tensor3 difference_tensor(const Manifold& m, const Coord& x) { return difference_tensor(m.jet(x, false)); }

Tensor4 difference_tensor_derivative(const LocalJet& J) {
    if (!J.second_order) throw std::invalid_argument("difference_tensor_derivative needs a second-order jet");
    const std::size_t n = J.n;
    const Vector grad = J.ginv * J.dsigma;
    Tensor4 D(n);
    for (std::size_t m = 0; m < n; ++m) {
        // d_m grad^k = d_m g^kl s_l + g^kl s_lm
        Vector dgrad = Vector::Zero(I(n));
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l)
                dgrad[I(k)] += J.dginv(m, k, l) * J.dsigma[I(l)] + J.ginv(I(k), I(l)) * J.ddsigma(I(l), I(m));
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    D(m, k, i, j) = -0.5 * (J.ddsigma(I(i), I(m)) * delta(k, j) + J.ddsigma(I(j), I(m)) * delta(k, i) +
                                            J.dg(m, i, j) * grad[I(k)] + J.g(I(i), I(j)) * dgrad[I(k)]);
    }
    return D;
}

Tensor3 cubic_form(const LocalJet& J) {
    const std::size_t n = J.n;
    Tensor3 C(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k)
                C(i, j, k) = J.dsigma[I(i)] * J.g(I(j), I(k)) + J.dsigma[I(j)] * J.g(I(k), I(i)) +
                             J.dsigma[I(k)] * J.g(I(i), I(j));
    return C;
}

Tensor3 cubic_form(const Manifold& m, const Coord& x) { return cubic_form(m.jet(x, false)); }

Tensor3 cubic_form_from_difference(const LocalJet& J) {
    const std::size_t n = J.n;
    const Tensor3 K = difference_tensor(J);
    Tensor3 C(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                double s = 0.0;
                for (std::size_t l = 0; l < n; ++l) s += J.g(I(k), I(l)) * K(l, i, j);
                C(i, j, k) = -2.0 * s;
            }
    return C;
}

LocalJet conformal_jet(const LocalJet& J) {
    const std::size_t n = J.n;
    LocalJet T = J;
    const double f = std::exp(J.sigma);
    T.g = f * J.g;
    T.ginv = J.ginv / f;
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                T.dg(m, i, j) = f * (J.dsigma[I(m)] * J.g(I(i), I(j)) + J.dg(m, i, j));
                T.dginv(m, i, j) = (J.dginv(m, i, j) - J.dsigma[I(m)] * J.ginv(I(i), I(j))) / f;
            }
    if (J.second_order)
        for (std::size_t m = 0; m < n; ++m)
            for (std::size_t p = 0; p < n; ++p)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double sm = J.dsigma[I(m)], sp = J.dsigma[I(p)];
                        T.ddg(m, p, i, j) = f * ((sm * sp + J.ddsigma(I(m), I(p))) * J.g(I(i), I(j)) +
                                                 sm * J.dg(p, i, j) + sp * J.dg(m, i, j) + J.ddg(m, p, i, j));
                    }
    return T;
}

Tensor3 connection_coeffs(const LocalJet& J, ConnectionKind kind) {
    const Tensor3 G = christoffel_g(J);
    switch (kind) {
    case ConnectionKind::LeviCivita:
        return G;
    case ConnectionKind::Nabla:
        return combine(G, difference_tensor(J), 1.0);
    case ConnectionKind::NablaBar:
        return combine(G, difference_tensor(J), -1.0);
    case ConnectionKind::LeviCivitaTilde: {
        Tensor3 T = combine(G, difference_tensor(J), 1.0);
        const std::size_t n = J.n;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    T(k, i, j) += delta(k, i) * J.dsigma[I(j)] + delta(k, j) * J.dsigma[I(i)];
        return T;
    }
    }
    throw std::invalid_argument("connection_coeffs: bad kind");
}

Tensor3 connection_coeffs(const Manifold& m, const Coord& x, ConnectionKind kind) {
    return connection_coeffs(m.jet(x, false), kind);
}

Tensor4 connection_derivative(const LocalJet& J, ConnectionKind kind) {
    if (!J.second_order) throw std::invalid_argument("connection_derivative needs a second-order jet");
    const Tensor4 DG = christoffel_g_derivative(J);
    switch (kind) {
    case ConnectionKind::LeviCivita:
        return DG;
    case ConnectionKind::Nabla:
        return combine(DG, difference_tensor_derivative(J), 1.0);
    case ConnectionKind::NablaBar:
        return combine(DG, difference_tensor_derivative(J), -1.0);
    case ConnectionKind::LeviCivitaTilde: {
        Tensor4 T = combine(DG, difference_tensor_derivative(J), 1.0);
        const std::size_t n = J.n;
        for (std::size_t m = 0; m < n; ++m)
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        T(m, k, i, j) += delta(k, i) * J.ddsigma(I(j), I(m)) + delta(k, j) * J.ddsigma(I(i), I(m));
        return T;
    }
    }
    throw std::invalid_argument("connection_derivative: bad kind");
}

double volume_density(const LocalJet& J) {
    const double n = static_cast<double>(J.n);
    return std::exp(-0.5 * (n + 2.0) * J.sigma) * std::sqrt(J.g.determinant());
}

double volume_density(const Manifold& m, const Coord& x) { return volume_density(m.jet(x, false)); }

Vector parallel_volume_residual(const LocalJet& J) {
    const std::size_t n = J.n;
    const double theta = volume_density(J);
    const Tensor3 N = connection_coeffs(J, ConnectionKind::Nabla);
    // d_i theta_0 = theta_0 (-(n+2)/2 s_i + 1/2 g^ab d_i g_ab)
    Vector r(I(n));
    for (std::size_t i = 0; i < n; ++i) {
        double dlogdet = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) dlogdet += J.ginv(I(a), I(b)) * J.dg(i, a, b);
        double dtheta = theta * (-0.5 * (static_cast<double>(n) + 2.0) * J.dsigma[I(i)] + 0.5 * dlogdet);
        double trace = 0.0;
        for (std::size_t k = 0; k < n; ++k) trace += N(k, i, k);
        r[I(i)] = dtheta - theta * trace;
    }
    return r;
}

Vector parallel_volume_residual(const Manifold& m, const Coord& x) { return parallel_volume_residual(m.jet(x, false)); }

Vector trace_K(const LocalJet& J) {
    const std::size_t n = J.n;
    const Tensor3 N = connection_coeffs(J, ConnectionKind::Nabla);
    const Tensor3 G = christoffel_g(J);
    Vector t = Vector::Zero(I(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) t[I(i)] += N(k, i, k) - G(k, i, k);
    return t;
}

Vector trace_K(const Manifold& m, const Coord& x) { return trace_K(m.jet(x, false)); }

double StructureResiduals::max() const noexcept {
    return std::max({metric_compatibility, codazzi, cubic_symmetry, duality, conjugate_sum, conformal_lc, projective,
                     cubic_cross_check, trace_identity, volume_parallel});
}

StructureResiduals structure_residuals(const LocalJet& J) {
    const std::size_t n = J.n;
    StructureResiduals r;
    const Tensor3 G = christoffel_g(J);
    const Tensor3 N = connection_coeffs(J, ConnectionKind::Nabla);
    const Tensor3 B = connection_coeffs(J, ConnectionKind::NablaBar);
    const Tensor3 T = christoffel_g(conformal_jet(J));
    const Tensor3 C = cubic_form(J);
    const Vector grad = J.ginv * J.dsigma;

    r.metric_compatibility = metric_compatibility_residual(J);

    // (nabla_k g)_ij = d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il
    Tensor3 ng(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double v = J.dg(k, i, j);
                double dual = J.dg(k, i, j);
                for (std::size_t l = 0; l < n; ++l) {
                    v -= N(l, k, i) * J.g(I(l), I(j)) + N(l, k, j) * J.g(I(i), I(l));
                    dual -= N(l, k, i) * J.g(I(l), I(j)) + B(l, k, j) * J.g(I(i), I(l));
                }
                ng(k, i, j) = v;
                r.codazzi = std::max(r.codazzi, std::fabs(v - C(k, i, j)));
                r.duality = std::max(r.duality, std::fabs(dual));
            }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                r.cubic_symmetry = std::max({r.cubic_symmetry, std::fabs(ng(k, i, j) - ng(i, k, j)),
                                             std::fabs(ng(k, i, j) - ng(j, i, k))});

    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double ds_ij = delta(k, j) * J.dsigma[I(i)] + delta(k, i) * J.dsigma[I(j)];
                r.conjugate_sum = std::max(r.conjugate_sum, std::fabs(N(k, i, j) + B(k, i, j) - 2.0 * G(k, i, j)));
                const double conformal = 0.5 * (ds_ij - J.g(I(i), I(j)) * grad[I(k)]);
                r.conformal_lc = std::max(r.conformal_lc, std::fabs(T(k, i, j) - G(k, i, j) - conformal));
                r.projective = std::max(r.projective, std::fabs(T(k, i, j) - N(k, i, j) - ds_ij));
            }

    r.cubic_cross_check = max_abs_diff(C.data(), cubic_form_from_difference(J).data());
    const Vector tk = trace_K(J);
    r.trace_identity = (tk + 0.5 * (static_cast<double>(n) + 2.0) * J.dsigma).cwiseAbs().maxCoeff();
    r.volume_parallel = parallel_volume_residual(J).cwiseAbs().maxCoeff();
    return r;
}

}  // namespace divstat

#pragma once

#include "divstat/manifold.hpp"

#include <string>

namespace divstat {

/// The four torsion-free connections derived from (g, sigma).
enum class ConnectionKind {
    LeviCivita,       // Levi-Civita connection of g
    Nabla,            // Levi-Civita + K
    NablaBar,         // Levi-Civita - K (g-conjugate)
    LeviCivitaTilde,  // Levi-Civita connection of e^sigma g
};

const char* kind_name(ConnectionKind kind) noexcept;
/// Accepts "lc", "nabla", "bar", "lc-tilde".
ConnectionKind parse_kind(const std::string& text);

/// Difference tensor K^k_ij = -1/2 (s_i d^k_j + s_j d^k_i + g_ij grad^k s), layout (k,i,j).
Tensor3 difference_tensor(const LocalJet& jet);
Tensor3 difference_tensor(const Manifold& m, const Coord& x);

/// d_m K^k_ij, layout (m,k,i,j); needs a second-order jet.
Tensor4 difference_tensor_derivative(const LocalJet& jet);

/// C_ijk = s_i g_jk + s_j g_ki + s_k g_ij.
Tensor3 cubic_form(const LocalJet& jet);
Tensor3 cubic_form(const Manifold& m, const Coord& x);
/// The same tensor as -2 g_kl K^l_ij; agrees with cubic_form to rounding.
Tensor3 cubic_form_from_difference(const LocalJet& jet);

/// Jet of the conformal metric e^sigma g computed directly from the jet of g
/// (sigma entries are copied unchanged). Christoffel symbols of this jet give
/// the Levi-Civita connection of e^sigma g independently of Nabla.
LocalJet conformal_jet(const LocalJet& jet);

/// Gamma^k_ij of the chosen connection, layout (k,i,j).
Tensor3 connection_coeffs(const LocalJet& jet, ConnectionKind kind);
Tensor3 connection_coeffs(const Manifold& m, const Coord& x, ConnectionKind kind);

/// d_m Gamma^k_ij, layout (m,k,i,j). Exact: built from the symbolic second
/// derivatives of g and sigma held in a second-order jet.
Tensor4 connection_derivative(const LocalJet& jet, ConnectionKind kind);

/// theta_0 = e^{-(n+2) sigma / 2} sqrt(det g).
double volume_density(const LocalJet& jet);
double volume_density(const Manifold& m, const Coord& x);

/// Components of nabla theta: d_i theta_0 - theta_0 Gamma^k_ik (Nabla). Zero
/// for the parallel volume form.
Vector parallel_volume_residual(const LocalJet& jet);
Vector parallel_volume_residual(const Manifold& m, const Coord& x);

/// (tr K)_i = Gamma(Nabla)^k_ik - Gamma(LC)^k_ik.
Vector trace_K(const LocalJet& jet);
Vector trace_K(const Manifold& m, const Coord& x);

/// Max residuals of the structure identities at one point.
struct StructureResiduals {
    double metric_compatibility = 0.0;  // LC metric compatibility
    double codazzi = 0.0;               // (nabla_k g)_ij - C_kij
    double cubic_symmetry = 0.0;        // total symmetry of nabla g
    double duality = 0.0;               // d_k g_ij - Gamma_ki^l g_lj - Gammabar_kj^l g_il
    double conjugate_sum = 0.0;         // Gamma + Gammabar - 2 Gamma_LC
    double conformal_lc = 0.0;          // LC(e^s g) - LC(g) vs 1/2(ds d + d ds - g grad s)
    double projective = 0.0;            // LC(e^s g) - Nabla vs ds d + d ds
    double cubic_cross_check = 0.0;     // cubic_form vs -2 g K
    double trace_identity = 0.0;        // tr K + (n+2)/2 ds
    double volume_parallel = 0.0;       // parallel_volume_residual

    double max() const noexcept;
};

StructureResiduals structure_residuals(const LocalJet& jet);

}  // namespace divstat

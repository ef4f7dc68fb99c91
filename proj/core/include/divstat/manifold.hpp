#pragma once

#include "divstat/expr.hpp"
#include "divstat/tensor.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace divstat {

/// Invalid manifold definition (parse, dimension, symmetry or SPD failure).
class ManifoldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A geometry query was made at a point outside the chart domain.
class OutOfDomain : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Box plus optional extra predicate from which random in-domain points are
/// drawn (SPD spot checks, scans, test sampling).
struct SampleRegion {
    std::vector<std::pair<double, double>> box;
    Predicate extra;
};

/// Single-chart statistical manifold with divisible cubic form, given by
/// the metric g and the potential sigma.
struct ManifoldDef {
    std::string name;
    std::size_t dim = 0;
    std::vector<std::string> coords;
    Predicate domain;
    std::string domain_src = "true";
    /// Full n x n matrix; metric[i][j] and metric[j][i] are the same tree.
    std::vector<std::vector<Expr>> metric;
    Expr sigma;
    SampleRegion region;
};

/// Value, first and (optionally) second derivatives of g and sigma at a point.
struct LocalJet {
    std::size_t n = 0;
    bool second_order = false;
    Coord x;
    double sigma = 0.0;
    Vector dsigma;       // d_i sigma
    Matrix ddsigma;      // d_i d_j sigma
    Matrix g;            // g_ij
    Matrix ginv;         // g^ij
    Tensor3 dg;          // (m,i,j): d_m g_ij
    Tensor3 dginv;       // (m,i,j): d_m g^ij
    Tensor4 ddg;         // (m,p,i,j): d_m d_p g_ij
};

/// Validated manifold with compiled derivative tapes. Immutable and safe to
/// query from several threads.
class Manifold {
public:
    explicit Manifold(ManifoldDef def);

    const ManifoldDef& def() const noexcept { return *def_; }
    const std::string& name() const noexcept { return def_->name; }
    std::size_t dim() const noexcept { return def_->dim; }

    bool in_domain(const Coord& x) const noexcept;
    void require_domain(const Coord& x) const;

    double sigma(const Coord& x) const;
    Matrix metric(const Coord& x) const;
    Matrix metric_inverse(const Coord& x) const;

    /// Second-order jets are needed for curvature; geodesics need first order.
    LocalJet jet(const Coord& x, bool second_order) const;

    /// Pseudo-random in-domain point from the sample region.
    template <class Rng>
    Coord sample_point(Rng& rng) const;

    /// The sigma -> -sigma involution (conjugate statistical structure).
    Manifold conjugate() const;

private:
    std::shared_ptr<const ManifoldDef> def_;
    std::shared_ptr<const Tape> order1_;
    std::shared_ptr<const Tape> order2_;
};

/// Builds a definition and validates symmetry plus SPD at 32 seeded points.
Manifold load_manifold_json(const std::string& json_text);
Manifold load_manifold_file(const std::string& path);

/// "euclidean", "paraboloid", "punctured-plane", "half-plane-exp".
Manifold builtin_manifold(const std::string& name);
std::vector<std::string> builtin_names();

/// Built-in name, or else a path to a JSON definition.
Manifold resolve_manifold(const std::string& name_or_path);

/// Symmetry and SPD validation; throws ManifoldError.
void validate(const Manifold& m, std::size_t samples = 32, std::uint64_t seed = 20240607);

inline constexpr double kSpdEpsilon = 1e-12;

// Base Riemannian geometry of (M, g).

/// Gamma^k_ij of the Levi-Civita connection, layout (k,i,j).
Tensor3 christoffel_g(const Manifold& m, const Coord& x);
Tensor3 christoffel_g(const LocalJet& jet);

Vector grad_sigma(const LocalJet& jet);
/// Hess_ij = d_i d_j sigma - Gamma^k_ij d_k sigma.
Matrix hess_sigma(const LocalJet& jet);
double laplace_sigma(const LocalJet& jet);

FrameVec grad_sigma(const Manifold& m, const Coord& x);
Matrix hess_sigma(const Manifold& m, const Coord& x);
double laplace_sigma(const Manifold& m, const Coord& x);

/// max |d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il|.
double metric_compatibility_residual(const LocalJet& jet);

/// Gram-Schmidt of the coordinate frame with respect to g (index order).
/// Column a holds the components of e_a.
Matrix orthonormal_frame(const Matrix& g);

/// Gram-Schmidt of (X, Y) with respect to g; throws on a degenerate pair.
std::pair<Vector, Vector> orthonormalize_pair(const Matrix& g, const Vector& X, const Vector& Y);

// ---------------------------------------------------------------------------

template <class Rng>
Coord Manifold::sample_point(Rng& rng) const {
    const auto& box = def_->region.box;
    Coord x(static_cast<Eigen::Index>(dim()));
    for (int attempt = 0; attempt < 100000; ++attempt) {
        for (std::size_t i = 0; i < dim(); ++i) {
            double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            x[static_cast<Eigen::Index>(i)] = box[i].first + u * (box[i].second - box[i].first);
        }
        std::span<const double> view(x.data(), dim());
        if (in_domain(x) && def_->region.extra.holds(view)) return x;
    }
    throw ManifoldError("no in-domain sample point found in the sample region of '" + name() + "'");
}

}  // namespace divstat

#pragma once

#include "divstat/curvature.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace divstat {

/// Grid "x1:a:b:n,x2:a:b:n,..." (one axis per coordinate, n >= 1 nodes) or
/// `count` seeded random points from the manifold's sample region.
struct SampleSpec {
    struct Axis {
        double lo = 0.0, hi = 0.0;
        std::size_t n = 1;
    };
    bool grid = false;
    std::vector<Axis> axes;
    std::size_t count = 100;
    std::uint64_t seed = 42;

    std::string str() const;
};

SampleSpec parse_grid(const std::string& text, const Manifold& m);
SampleSpec random_spec(std::size_t count, std::uint64_t seed);

/// Grid nodes that lie in the domain (in lexicographic order), or the random points.
std::vector<Coord> sample_points(const Manifold& m, const SampleSpec& spec);

struct CheckResult {
    std::string name;
    double worst = 0.0;
    Coord worst_point;
    bool pass = true;
    bool reported_only = false;  // informational, never fails the report
    double tolerance = 0.0;
    std::string note;
};

struct ScanReport {
    std::string manifold;
    std::string sample_spec;
    std::size_t points = 0;
    double tolerance = 0.0;
    bool heuristic = false;
    std::vector<CheckResult> checks;

    bool pass() const noexcept;
    const CheckResult* find(const std::string& name) const noexcept;
};

/// 2 g(S(X,Y)Y,X) - (Hess(X,X) + Hess(Y,Y) + |d sigma|^2) for g-orthonormal X, Y.
double hadamard_lhs(const LocalJet& jet, const Vector& X, const Vector& Y);
/// 2 k^g + |d sigma|^2 - Lap sigma (dimension 2).
double hadamard2d_lhs(const LocalJet& jet);

/// Max of hadamard_lhs over all coordinate planes plus `planes` seeded random
/// planes per point; passes iff the max is <= tol.
ScanReport hadamard_scan(const Manifold& m, const SampleSpec& spec, std::size_t planes = 4, std::uint64_t seed = 42,
                         double tol = 1e-8);
ScanReport hadamard2d_scan(const Manifold& m, const SampleSpec& spec, double tol = 1e-8);

/// Sampled extrema of sigma. A heuristic: sampling cannot prove boundedness.
struct SigmaBounds {
    double min = 0.0, max = 0.0;
    Coord argmin, argmax;
    std::size_t samples = 0;
    static constexpr bool heuristic = true;
};
SigmaBounds sigma_bounds_scan(const Manifold& m, const SampleSpec& spec);

struct SuiteOpts {
    std::size_t samples = 100;
    double tol = 1e-8;
    std::uint64_t seed = 42;
};

/// Structure, curvature and volume identities at seeded random points, plus
/// the conjugate-symmetry residual and the best constant-curvature lambda
/// (both reported only).
ScanReport check_suite(const Manifold& m, const SuiteOpts& opts = {});

}  // namespace divstat

#pragma once

#include "divstat/ode.hpp"
#include "divstat/statstruct.hpp"

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace divstat {

enum class PathStatus { Completed, ExitedDomain, StepLimit, StepUnderflow };

/// "completed", "exited-domain", "step-limit", "step-underflow".
const char* status_name(PathStatus s) noexcept;

struct PathSample {
    double t = 0.0;
    Coord x;
    Vector v;
};

struct GeodesicPath {
    ConnectionKind kind = ConnectionKind::LeviCivita;
    std::vector<PathSample> samples;
    PathStatus status = PathStatus::Completed;
    double exit_parameter = 0.0;  // last parameter reached (t1 when completed)
    std::size_t steps = 0;
    std::size_t rejected = 0;
    double quadrature_error = 0.0;  // set by the reparametrizations
    /// Continuous extension of the state (x, v), one entry per accepted
    /// integrator step. Empty for reparametrized or hand-built paths.
    std::vector<DenseStep> dense;

    const PathSample& front() const { return samples.front(); }
    const PathSample& back() const { return samples.back(); }
};

struct IntegratorOpts {
    double rtol = 1e-9;
    double atol = 1e-11;
    std::size_t max_steps = 1'000'000;
    /// Largest chart displacement |h v| per step. Keeps stage points dense
    /// enough that the integrator cannot step over a small hole in the chart
    /// (punctured domains) without evaluating inside it.
    double max_chart_step = 0.05;
    /// Uniform dense-output intervals on [0, t1].
    std::size_t samples = 200;
    /// Extra output parameters (merged with the uniform grid).
    std::vector<double> output_times;
    /// Keep the per-step continuous extension on the path.
    bool keep_dense = true;
};

/// Thrown by exp_map and by callers that require a completed geodesic.
class GeodesicError : public std::runtime_error {
public:
    GeodesicError(const std::string& what, PathStatus status, double parameter)
        : std::runtime_error(what), status_(status), parameter_(parameter) {}
    PathStatus status() const noexcept { return status_; }
    double parameter() const noexcept { return parameter_; }

private:
    PathStatus status_;
    double parameter_;
};

/// x'' + Gamma(x', x') = 0 from (x0, v0) on [0, t1]. Leaving the chart ends
/// the path with ExitedDomain (the last step is bisected to the boundary).
GeodesicPath integrate_geodesic(const Manifold& m, ConnectionKind kind, const Coord& x0, const Vector& v0,
                                double t1, const IntegratorOpts& opts = {});

/// Endpoint at t = 1; throws GeodesicError unless the path completes.
Coord exp_map(const Manifold& m, ConnectionKind kind, const Coord& p, const Vector& v,
              const IntegratorOpts& opts = {});

/// Nabla-geodesic -> LC(e^sigma g)-geodesic via s(t) = int_0^t e^{2 sigma}.
///
/// The integral is composite Simpson on the continuous extension when the
/// path carries one, otherwise adaptive Simpson along the cubic Hermite
/// interpolant of the samples.
GeodesicPath reparam_to_tilde(const Manifold& m, const GeodesicPath& path);
/// LC(e^sigma g)-geodesic -> Nabla-geodesic via t(s) = int_0^s e^{-2 sigma}.
GeodesicPath reparam_from_tilde(const Manifold& m, const GeodesicPath& path);

/// Max over interior samples of |x' - v| / max(1, |v|) and
/// |v' + Gamma(v, v)| / max(1, |v|^2) (max norms; plain absolute defects for
/// paths with |v| <= 1).
///
/// Derivatives are 4th-order central differences of the continuous
/// extension when it reproduces the samples; otherwise 5-point differences
/// on the sample grid (so edited samples are judged as data).
double geodesic_residual(const Manifold& m, ConnectionKind kind, const GeodesicPath& path);

/// Sampled symmetric Hausdorff distance between two paths' positions.
double hausdorff(const GeodesicPath& a, const GeodesicPath& b);

/// Header `t,x1,..,xn,v1,..,vn`, one row per sample, `# status=<...>` last.
void write_csv(std::ostream& os, const GeodesicPath& path);

}  // namespace divstat

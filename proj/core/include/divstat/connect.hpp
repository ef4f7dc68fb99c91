#pragma once

#include "divstat/geodesic.hpp"

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace divstat {

struct ShootOpts {
    std::size_t multistart = 16;
    std::size_t max_iterations = 60;
    double eps_bvp = 1e-8;
    std::uint64_t seed = 42;
    /// Samples of the returned paths.
    std::size_t path_samples = 200;
    /// Run multistart branches on separate threads.
    bool parallel = true;
    IntegratorOpts integrator{};
};

/// One multistart branch.
struct ShootSolution {
    std::size_t start = 0;
    Vector initial_guess;
    Vector velocity;  // initial velocity of the e^sigma g geodesic
    double tilde_length = std::numeric_limits<double>::infinity();
    double endpoint_error = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

struct ConnectResult {
    GeodesicPath tilde_path;  // LC(e^sigma g), s in [0, 1]
    GeodesicPath nabla_path;  // its Nabla reparametrization
    double tilde_length = std::numeric_limits<double>::infinity();
    double endpoint_error = std::numeric_limits<double>::infinity();
    std::size_t attempts = 0;
    bool converged = false;
    std::size_t best_start = 0;
    Vector tilde_velocity;
    /// Every converged branch, in start order.
    std::vector<ShootSolution> solutions;
};

class NoConvergence : public std::runtime_error {
public:
    NoConvergence(const std::string& what, double best_residual)
        : std::runtime_error(what), best_residual_(best_residual) {}
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

/// Two-point problem for Nabla: shoot an e^sigma g geodesic from p to q by
/// damped Gauss-Newton on exp_p(v) - q, then reparametrize it.
ConnectResult shoot_connect(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts = {});

/// Length of the shortest converged shooting solution; throws NoConvergence.
double distance_tilde(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts = {});

struct DistanceReport {
    double forward = 0.0;   // d(p, q)
    double backward = 0.0;  // d(q, p)
    double asymmetry = 0.0;
};
DistanceReport distance_tilde_report(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts = {});

/// rho(p, q) = e^{-sigma(p)} d(p, q)^2; exactly 0 for p == q.
double contrast(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts = {});

/// 4th-order central-difference derivatives (offsets +-h, +-2h) of rho on
/// the diagonal at p in the coordinate frame:
///   mixed(i,j)   = d/dp_i d/dq_j rho           (compared with -g_ij)
///   third(i,j,k) = d/dp_i d/dp_j d/dq_k rho    (compared with -g(Nabla_i d_j, d_k))
struct ContrastCheck {
    double h = 0.0;
    Matrix mixed;
    Tensor3 third;
    Matrix g;
    Tensor3 nabla_lowered;     // Gamma^l_ij g_lk, layout (i,j,k)
    double g_deviation = 0.0;      // max |mixed + g|
    double nabla_deviation = 0.0;  // max |third + nabla_lowered|
    /// Same deviations for rho / 2.
    double g_deviation_half = 0.0;
    double nabla_deviation_half = 0.0;
    /// Least-squares c with mixed ~ -c g.
    double g_scale = 0.0;
    /// Smallest eigenvalue of the symmetric part of -mixed.
    double min_eigenvalue = 0.0;
};

ContrastCheck contrast_structure_check(const Manifold& m, const Coord& p, double h, const ShootOpts& opts = {});

}  // namespace divstat

#pragma once

#include "divstat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace divstat {

/// Continuous extension of one accepted step [t0, t0 + h]; a quintic in
/// theta = (t - t0) / h matching the state and its derivative at both ends.
struct DenseStep {
    double t0 = 0.0, h = 0.0;
    Vector y0, ydiff, bspl, r4, r5;

    double t1() const noexcept { return t0 + h; }
    /// Also usable slightly outside the step (polynomial extrapolation).
    Vector operator()(double t) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        return y0 + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
    }
};

/// Dormand-Prince 5(4) with the 4th-order continuous extension.
///
/// The right-hand side may throw to signal that a stage left the domain of
/// the vector field; the integrator then bisects the step towards the
/// boundary instead of failing.
class Dopri5 {
public:
    using Rhs = std::function<void(const Vector& y, Vector& dy)>;
    /// Returns false when the accepted state is not admissible.
    using Admissible = std::function<bool(const Vector& y)>;

    enum class Status { Completed, Boundary, StepLimit, StepUnderflow };

    struct Options {
        double rtol = 1e-9;
        double atol = 1e-11;
        std::size_t max_steps = 1'000'000;
        double boundary_tol = 1e-10;  // smallest step when bisecting to a boundary
        double initial_step = 0.0;    // 0: choose automatically
        /// Sorted interior parameters that steps must land on exactly.
        std::vector<double> stops;
    };

    /// Optional upper bound for the next step given the state and its derivative.
    using StepCap = std::function<double(const Vector& y, const Vector& dy)>;

    struct Result {
        Status status = Status::Completed;
        double t_end = 0.0;
        Vector y_end;
        std::size_t accepted = 0;
        std::size_t rejected = 0;
    };

    /// Called for every accepted step with its continuous extension.
    using StepObserver = std::function<void(const DenseStep& step)>;

    Dopri5(Rhs rhs, Admissible admissible, Options opts, StepCap cap = {})
        : rhs_(std::move(rhs)), admissible_(std::move(admissible)), opts_(opts), cap_(std::move(cap)) {}

    Result integrate(const Vector& y0, double t1, const StepObserver& observe) const;

private:
    double error_norm(const Vector& y, const Vector& y1, const Vector& err) const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc = opts_.atol + opts_.rtol * std::max(std::fabs(y[i]), std::fabs(y1[i]));
            const double r = err[i] / sc;
            s += r * r;
        }
        return std::sqrt(s / static_cast<double>(y.size()));
    }

    Rhs rhs_;
    Admissible admissible_;
    Options opts_;
    StepCap cap_;
};

inline Dopri5::Result Dopri5::integrate(const Vector& y0, double t1, const StepObserver& observe) const {
    // Butcher tableau
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                     a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    // continuous extension
    constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                     d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                     d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
    (void)c2, (void)c3, (void)c4, (void)c5;

    Result res;
    res.y_end = y0;
    const Eigen::Index dim = y0.size();
    Vector y = y0, k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), y1(dim), tmp(dim), err(dim);

    try {
        rhs_(y, k1);
    } catch (...) {
        res.status = Status::Boundary;
        return res;
    }

    double t = 0.0;
    double h = opts_.initial_step;
    if (h <= 0.0) {
        // Hairer's starting step heuristic (first-order part).
        double d0 = 0.0, dd1 = 0.0;
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double sc = opts_.atol + opts_.rtol * std::fabs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            dd1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / static_cast<double>(dim));
        dd1 = std::sqrt(dd1 / static_cast<double>(dim));
        h = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
        h = std::min(h, t1);
    }
    const double hmax = t1;
    bool last_rejected = false;
    std::size_t stop = 0;
    while (stop < opts_.stops.size() && opts_.stops[stop] <= 0.0) ++stop;

    while (t < t1) {
        if (res.accepted + res.rejected >= opts_.max_steps) {
            res.status = Status::StepLimit;
            break;
        }
        if (cap_) h = std::min(h, cap_(y, k1));
        h = std::min(h, t1 - t);
        double target = t1;
        if (stop < opts_.stops.size() && opts_.stops[stop] < t1 && t + h >= opts_.stops[stop]) {
            target = opts_.stops[stop];
            h = target - t;
        }
        const bool landing = (t + h == target) || (target - t == h);
        bool outside = false;
        double err_norm = 0.0;
        try {
            tmp = y + h * a21 * k1;
            rhs_(tmp, k2);
            tmp = y + h * (a31 * k1 + a32 * k2);
            rhs_(tmp, k3);
            tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            rhs_(tmp, k4);
            tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            rhs_(tmp, k5);
            tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            rhs_(tmp, k6);
            y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            if (!y1.allFinite() || !admissible_(y1)) throw 0;
            rhs_(y1, k7);
            err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            err_norm = error_norm(y, y1, err);
            if (!std::isfinite(err_norm)) throw 0;
        } catch (...) {
            outside = true;
        }

        if (outside) {
            ++res.rejected;
            h *= 0.5;
            if (h < opts_.boundary_tol) {
                res.status = Status::Boundary;
                break;
            }
            last_rejected = true;
            continue;
        }

        if (err_norm <= 1.0) {
            if (observe) {
                DenseStep d;
                d.t0 = t;
                d.h = h;
                d.y0 = y;
                d.ydiff = y1 - y;
                d.bspl = h * k1 - d.ydiff;
                d.r4 = d.ydiff - h * k7 - d.bspl;
                d.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                observe(d);
            }
            ++res.accepted;
            if (landing) {
                t = target;
                if (stop < opts_.stops.size() && target == opts_.stops[stop]) ++stop;
            } else {
                t = (t1 - t - h <= 1e-15 * std::max(1.0, std::fabs(t1))) ? t1 : t + h;
            }
            y = y1;
            k1 = k7;
            double fac = 0.9 * std::pow(std::max(err_norm, 1e-10), -0.2);
            fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
            h = std::min(h * fac, hmax);
            last_rejected = false;
        } else {
            ++res.rejected;
            h *= std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
            last_rejected = true;
            if (h < 1e-14 * std::max(1.0, std::fabs(t))) {
                res.status = Status::StepUnderflow;
                break;
            }
        }
    }
    res.t_end = t;
    res.y_end = y;
    return res;
}

}  // namespace divstat

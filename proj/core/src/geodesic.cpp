#include "divstat/geodesic.hpp"

#include "divstat/ode.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace divstat {

const char* status_name(PathStatus s) noexcept {
    switch (s) {
        case PathStatus::Completed: return "completed";
        case PathStatus::ExitedDomain: return "exited-domain";
        case PathStatus::StepLimit: return "step-limit";
        case PathStatus::StepUnderflow: return "step-underflow";
    }
    return "?";
}

namespace {

Vector geodesic_accel(const Tensor3& G, const Vector& v) {
    const std::size_t n = G.dim();
    Vector a = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s += G(k, i, j) * v[i] * v[j];
        a[k] = -s;
    }
    return a;
}

std::vector<double> output_grid(double t1, const IntegratorOpts& opts) {
    std::vector<double> grid;
    const std::size_t n = std::max<std::size_t>(opts.samples, 1);
    grid.reserve(n + 1 + opts.output_times.size());
    for (std::size_t i = 0; i <= n; ++i) grid.push_back(i == n ? t1 : t1 * static_cast<double>(i) / static_cast<double>(n));
    for (double t : opts.output_times)
        if (t > 0.0 && t < t1) grid.push_back(t);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

}  // namespace

GeodesicPath integrate_geodesic(const Manifold& m, ConnectionKind kind, const Coord& x0, const Vector& v0,
                                double t1, const IntegratorOpts& opts) {
    m.require_domain(x0);
    const auto n = static_cast<Eigen::Index>(m.dim());
    if (x0.size() != n || v0.size() != n) throw std::invalid_argument("integrate_geodesic: dimension mismatch");
    if (!(t1 > 0.0) || !std::isfinite(t1)) throw std::invalid_argument("integrate_geodesic: t1 must be positive");
    if (!(opts.rtol > 0.0) || !(opts.atol > 0.0)) throw std::invalid_argument("integrate_geodesic: tolerances must be positive");

    auto rhs = [&](const Vector& y, Vector& dy) {
        const Coord x = y.head(n);
        const Vector v = y.tail(n);
        const Tensor3 G = connection_coeffs(m, x, kind);
        dy.resize(2 * n);
        dy.head(n) = v;
        dy.tail(n) = geodesic_accel(G, v);
        if (!dy.allFinite()) throw DomainError("non-finite geodesic acceleration", "rhs");
    };
    auto admissible = [&](const Vector& y) { return m.in_domain(y.head(n)); };

    Dopri5::Options o;
    o.rtol = opts.rtol;
    o.atol = opts.atol;
    o.max_steps = opts.max_steps;
    const std::vector<double> grid = output_grid(t1, opts);
    // Land steps on the output grid: samples are then integrator states
    // rather than values of the lower-order continuous extension.
    if (grid.size() > 2) o.stops.assign(grid.begin() + 1, grid.end() - 1);
    auto cap = [&](const Vector& y, const Vector&) {
        const double speed = y.tail(n).norm();
        return speed > 0.0 ? opts.max_chart_step / speed : std::numeric_limits<double>::infinity();
    };
    const Dopri5 solver(rhs, admissible, o, cap);

    GeodesicPath path;
    path.kind = kind;
    path.samples.reserve(grid.size());
    path.samples.push_back({0.0, x0, v0});
    std::size_t next = 1;

    auto observe = [&](const DenseStep& step) {
        const double tend = step.t1();
        const double slack = 1e-12 * std::max(1.0, std::fabs(t1));
        while (next < grid.size() && grid[next] <= tend + slack) {
            const double tq = std::min(grid[next], tend);
            const Vector y = step(tq);
            path.samples.push_back({grid[next], y.head(n), y.tail(n)});
            ++next;
        }
        if (opts.keep_dense) path.dense.push_back(step);
    };

    Vector y0(2 * n);
    y0 << x0, v0;
    const Dopri5::Result r = solver.integrate(y0, t1, observe);

    path.steps = r.accepted;
    path.rejected = r.rejected;
    path.exit_parameter = r.t_end;
    switch (r.status) {
        case Dopri5::Status::Completed: path.status = PathStatus::Completed; break;
        case Dopri5::Status::Boundary: path.status = PathStatus::ExitedDomain; break;
        case Dopri5::Status::StepLimit: path.status = PathStatus::StepLimit; break;
        case Dopri5::Status::StepUnderflow: path.status = PathStatus::StepUnderflow; break;
    }
    if (path.status != PathStatus::Completed && r.t_end > path.samples.back().t) {
        path.samples.push_back({r.t_end, r.y_end.head(n), r.y_end.tail(n)});
    }
    return path;
}

Coord exp_map(const Manifold& m, ConnectionKind kind, const Coord& p, const Vector& v, const IntegratorOpts& opts) {
    m.require_domain(p);
    if (v.norm() == 0.0) return p;
    IntegratorOpts o = opts;
    o.samples = 1;
    o.output_times.clear();
    o.keep_dense = false;
    const GeodesicPath path = integrate_geodesic(m, kind, p, v, 1.0, o);
    if (path.status != PathStatus::Completed) {
        throw GeodesicError(std::string("exponential map: geodesic ") + status_name(path.status) + " at t=" +
                                std::to_string(path.exit_parameter),
                            path.status, path.exit_parameter);
    }
    return path.back().x;
}

namespace {

// Step of a continuous extension containing t (the last one starting at or
// before t); nullptr outside the covered range.
const DenseStep* step_at(const std::vector<DenseStep>& dense, double t) {
    if (dense.empty() || t < dense.front().t0 || t > dense.back().t1()) return nullptr;
    auto it = std::upper_bound(dense.begin(), dense.end(), t, [](double v, const DenseStep& d) { return v < d.t0; });
    return &*std::prev(it);
}

// True when the continuous extension covers the samples and reproduces them.
bool dense_matches(const GeodesicPath& path) {
    if (path.dense.empty() || path.samples.empty()) return false;
    for (const auto& s : path.samples) {
        const DenseStep* d = step_at(path.dense, s.t);
        if (!d) return false;
        const Vector y = (*d)(s.t);
        const Eigen::Index n = s.x.size();
        const double scale = 1.0 + std::max(s.x.lpNorm<Eigen::Infinity>(), s.v.lpNorm<Eigen::Infinity>());
        if ((y.head(n) - s.x).lpNorm<Eigen::Infinity>() > 1e-9 * scale ||
            (y.tail(n) - s.v).lpNorm<Eigen::Infinity>() > 1e-9 * scale)
            return false;
    }
    return true;
}

// Simpson with 8 and 4 panels on [a, b]: (value, |difference| / 15).
template <class F>
std::pair<double, double> simpson8(const F& f, double a, double b) {
    double y[9];
    for (int k = 0; k < 9; ++k) y[k] = f(k == 8 ? b : a + (b - a) * k / 8.0);
    const double h = (b - a) / 8.0;
    const double fine = h / 3.0 * (y[0] + 4 * (y[1] + y[3] + y[5] + y[7]) + 2 * (y[2] + y[4] + y[6]) + y[8]);
    const double coarse = 2 * h / 3.0 * (y[0] + 4 * (y[2] + y[6]) + 2 * y[4] + y[8]);
    return {fine, std::fabs(fine - coarse) / 15.0};
}

// Adaptive Simpson; `err` accumulates the Richardson estimates.
template <class F>
double adaptive_simpson(const F& f, double a, double fa, double b, double fb, double m, double fm, double whole,
                        double tol, int depth, double& err) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::fabs(diff) <= 15.0 * tol) {
        err += std::fabs(diff) / 15.0;
        return left + right + diff / 15.0;
    }
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, err) +
           adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, err);
}

// Reparametrize by u(t) = int_0^t exp(2 c sigma(x(t'))) dt'; the velocity
// with respect to u is exp(-2 c sigma) v.
GeodesicPath reparametrize(const Manifold& m, const GeodesicPath& path, double c, ConnectionKind out_kind) {
    GeodesicPath out;
    out.kind = out_kind;
    out.status = path.status;
    out.steps = path.steps;
    out.rejected = path.rejected;
    if (path.samples.empty()) return out;

    const Eigen::Index n = path.samples.front().x.size();
    auto weight = [&](const Coord& x) { return std::exp(2.0 * c * m.sigma(x)); };
    const bool use_dense = dense_matches(path);

    const std::size_t N = path.samples.size();
    out.samples.reserve(N);
    out.samples.push_back({0.0, path.samples[0].x, path.samples[0].v / weight(path.samples[0].x)});
    double u = 0.0, err = 0.0;
    std::size_t k = 0;  // current dense step
    for (std::size_t i = 0; i + 1 < N; ++i) {
        const PathSample& a = path.samples[i];
        const PathSample& b = path.samples[i + 1];
        if (use_dense) {
            // Simpson on every piece of the continuous extension inside [a.t, b.t].
            while (k + 1 < path.dense.size() && path.dense[k].t1() <= a.t) ++k;
            for (std::size_t j = k; j < path.dense.size() && path.dense[j].t0 < b.t; ++j) {
                const DenseStep& d = path.dense[j];
                const double lo = std::max(a.t, d.t0), hi = std::min(b.t, d.t1());
                if (hi <= lo) continue;
                const auto [val, e] = simpson8([&](double t) { return weight(d(t).head(n)); }, lo, hi);
                u += val;
                err += e;
            }
        } else {
            // Adaptive Simpson along the cubic Hermite interpolant of the positions.
            const double h = b.t - a.t;
            auto f = [&](double t) {
                const double s = (t - a.t) / h, s2 = s * s, s3 = s2 * s;
                const Coord x = (2 * s3 - 3 * s2 + 1) * a.x + (s3 - 2 * s2 + s) * h * a.v + (-2 * s3 + 3 * s2) * b.x +
                                (s3 - s2) * h * b.v;
                return weight(x);
            };
            const double fa = f(a.t), fb = f(b.t), tm = 0.5 * (a.t + b.t), fm = f(tm);
            const double whole = h / 6.0 * (fa + 4 * fm + fb);
            const double tol = 1e-14 * std::max(std::fabs(whole), 1e-300);
            u += adaptive_simpson(f, a.t, fa, b.t, fb, tm, fm, whole, tol, 24, err);
        }
        out.samples.push_back({u, b.x, b.v / weight(b.x)});
    }
    out.exit_parameter = u;
    out.quadrature_error = err;
    return out;
}

}  // namespace

GeodesicPath reparam_to_tilde(const Manifold& m, const GeodesicPath& path) {
    if (path.kind != ConnectionKind::Nabla) throw std::invalid_argument("reparam_to_tilde expects a Nabla-geodesic");
    return reparametrize(m, path, 1.0, ConnectionKind::LeviCivitaTilde);
}

GeodesicPath reparam_from_tilde(const Manifold& m, const GeodesicPath& path) {
    if (path.kind != ConnectionKind::LeviCivitaTilde)
        throw std::invalid_argument("reparam_from_tilde expects an LC(e^sigma g)-geodesic");
    return reparametrize(m, path, -1.0, ConnectionKind::Nabla);
}

namespace {

// Fornberg weights for the first derivative at z over nodes t[0..4].
std::array<double, 5> fd_weights(double z, const std::array<double, 5>& t) {
    constexpr int N = 5, M = 1;
    double c[N][M + 1] = {};
    double c1 = 1.0, c4 = t[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < N; ++i) {
        const int mn = std::min(i, M);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = t[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = t[i] - t[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::array<double, 5> w{};
    for (int i = 0; i < N; ++i) w[i] = c[i][1];
    return w;
}

// Velocity and acceleration defects relative to max(1, |v|) and
// max(1, |v|^2): invariant under affine changes of parameter once |v| > 1.
double scaled_residual(const Vector& dx, const Vector& dv, const Vector& v) {
    const double speed = v.lpNorm<Eigen::Infinity>();
    return std::max(dx.lpNorm<Eigen::Infinity>() / std::max(1.0, speed),
                    dv.lpNorm<Eigen::Infinity>() / std::max(1.0, speed * speed));
}

}  // namespace

double geodesic_residual(const Manifold& m, ConnectionKind kind, const GeodesicPath& path) {
    const std::size_t N = path.samples.size();
    if (N < 5) throw std::invalid_argument("geodesic_residual needs at least 5 samples");
    double worst = 0.0;
    if (path.kind == kind && dense_matches(path)) {
        const Eigen::Index n = path.samples.front().x.size();
        for (std::size_t i = 1; i + 1 < N; ++i) {
            const double t = path.samples[i].t;
            const DenseStep& d = *step_at(path.dense, t);
            // Stencil on the polynomial of one step (extrapolated past its
            // ends if needed), so joins between steps do not enter.
            const double e = d.h / 8.0;
            const Vector dy = (-d(t + 2 * e) + 8.0 * d(t + e) - 8.0 * d(t - e) + d(t - 2 * e)) / (12.0 * e);
            const Vector y = d(t);
            const Vector v = y.tail(n);
            const Vector acc = geodesic_accel(connection_coeffs(m, y.head(n), kind), v);
            worst = std::max(worst, scaled_residual(dy.head(n) - v, dy.tail(n) - acc, v));
        }
        return worst;
    }
    for (std::size_t i = 2; i + 2 < N; ++i) {
        std::array<double, 5> t{};
        for (std::size_t k = 0; k < 5; ++k) t[k] = path.samples[i - 2 + k].t;
        const auto w = fd_weights(t[2], t);
        Vector dx = Vector::Zero(path.samples[i].x.size());
        Vector dv = dx;
        for (std::size_t k = 0; k < 5; ++k) {
            dx += w[k] * path.samples[i - 2 + k].x;
            dv += w[k] * path.samples[i - 2 + k].v;
        }
        const Vector& v = path.samples[i].v;
        const Vector acc = geodesic_accel(connection_coeffs(m, path.samples[i].x, kind), v);
        worst = std::max(worst, scaled_residual(dx - v, dv - acc, v));
    }
    return worst;
}

namespace {

double point_polyline(const Coord& p, const GeodesicPath& path) {
    double best = std::numeric_limits<double>::infinity();
    const auto& s = path.samples;
    if (s.size() == 1) return (p - s[0].x).norm();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const Vector d = s[i + 1].x - s[i].x;
        const double len2 = d.squaredNorm();
        double u = len2 > 0.0 ? (p - s[i].x).dot(d) / len2 : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        best = std::min(best, (p - (s[i].x + u * d)).norm());
    }
    return best;
}

}  // namespace

double hausdorff(const GeodesicPath& a, const GeodesicPath& b) {
    if (a.samples.empty() || b.samples.empty()) return std::numeric_limits<double>::infinity();
    double h = 0.0;
    for (const auto& s : a.samples) h = std::max(h, point_polyline(s.x, b));
    for (const auto& s : b.samples) h = std::max(h, point_polyline(s.x, a));
    return h;
}

void write_csv(std::ostream& os, const GeodesicPath& path) {
    const Eigen::Index n = path.samples.empty() ? 0 : path.samples.front().x.size();
    os << 't';
    for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
    for (Eigen::Index i = 1; i <= n; ++i) os << ",v" << i;
    os << '\n';
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (const auto& s : path.samples) {
        put(s.t);
        for (Eigen::Index i = 0; i < n; ++i) os << ',', put(s.x[i]);
        for (Eigen::Index i = 0; i < n; ++i) os << ',', put(s.v[i]);
        os << '\n';
    }
    os << "# status=" << status_name(path.status) << '\n';
}

}  // namespace divstat

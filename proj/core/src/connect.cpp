#include "divstat/connect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <map>
#include <numbers>
#include <random>

namespace divstat {

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

// Unit direction number k >= 1 of a deterministic low-discrepancy sphere
// sequence. Golden-angle spiral on the circle, normalized Halton points in
// higher dimension; the seed rotates/offsets the sequence.
Vector sphere_direction(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vector d(static_cast<Eigen::Index>(n));
    if (n == 1) {
        d[0] = (k % 2 == 0) ? 1.0 : -1.0;
        return d;
    }
    if (n == 2) {
        const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        const double a = phase + static_cast<double>(k) * golden;
        d << std::cos(a), std::sin(a);
        return d;
    }
    static constexpr std::uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    const std::uint64_t offset = rng() % 1024;
    for (std::uint64_t idx = k + offset;; idx += 1024) {
        for (std::size_t i = 0; i < n; ++i)
            d[static_cast<Eigen::Index>(i)] = 2.0 * radical_inverse(idx, primes[i % 16]) - 1.0;
        if (d.norm() > 1e-3) return d / d.norm();
    }
}

// e^sigma g length of the chart segment p -> q (composite Gauss-Legendre,
// 16 panels x 3 nodes); `fallback` when the segment leaves the chart.
double segment_length(const Manifold& m, const Coord& p, const Coord& q, double fallback) {
    static constexpr double node[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr double weight[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    constexpr int panels = 16;
    const Vector d = q - p;
    double sum = 0.0;
    try {
        for (int k = 0; k < panels; ++k)
            for (int i = 0; i < 3; ++i) {
                const double t = (k + 0.5 * (1.0 + node[i])) / panels;
                const Coord x = p + t * d;
                if (!m.in_domain(x)) return fallback;
                const LocalJet J = m.jet(x, false);
                sum += weight[i] * 0.5 / panels * std::exp(0.5 * J.sigma) * std::sqrt(std::max(0.0, d.dot(J.g * d)));
            }
    } catch (const std::exception&) {
        return fallback;
    }
    return std::isfinite(sum) && sum > 0.0 ? sum : fallback;
}

struct Shooter {
    const Manifold& m;
    const Coord& p;
    const Coord& q;
    const ShootOpts& opts;

    bool residual(const Vector& v, Vector& F) const {
        try {
            F = exp_map(m, ConnectionKind::LeviCivitaTilde, p, v, opts.integrator) - q;
            return F.allFinite();
        } catch (const std::exception&) {
            return false;
        }
    }

    double tilde_length(const Vector& v) const {
        const LocalJet J = m.jet(p, false);
        return std::exp(0.5 * J.sigma) * std::sqrt(std::max(0.0, v.dot(J.g * v)));
    }

    ShootSolution run(std::size_t start, const Vector& guess) const {
        ShootSolution s;
        s.start = start;
        s.initial_guess = guess;
        const auto n = static_cast<Eigen::Index>(m.dim());
        const double eps = opts.eps_bvp;

        Vector v = guess, F;
        bool ok = residual(v, F);
        for (int shrink = 0; !ok && shrink < 6; ++shrink) {
            v *= 0.5;
            ok = residual(v, F);
        }
        if (!ok) return s;
        s.velocity = v;
        s.endpoint_error = F.norm();

        double mu = 1e-8;
        Matrix J(n, n);
        Vector Fj;
        for (std::size_t it = 0; it < opts.max_iterations; ++it) {
            const double fn = F.norm();
            if (fn <= eps * 1e-3) break;
            // forward-difference Jacobian of the exponential map
            const double delta = 1e-6 * std::max(1.0, v.norm());
            bool jac_ok = true;
            for (Eigen::Index j = 0; j < n && jac_ok; ++j) {
                Vector vj = v;
                vj[j] += delta;
                if (residual(vj, Fj)) {
                    J.col(j) = (Fj - F) / delta;
                } else {
                    vj[j] = v[j] - delta;
                    jac_ok = residual(vj, Fj);
                    if (jac_ok) J.col(j) = (F - Fj) / delta;
                }
            }
            if (!jac_ok) break;
            ++s.iterations;

            const Matrix A = J.transpose() * J;
            const Vector b = -J.transpose() * F;
            const double scale = std::max(A.diagonal().maxCoeff(), 1e-300);
            bool accepted = false;
            Vector Ft;
            for (int tries = 0; tries < 12; ++tries) {
                Matrix Am = A;
                Am.diagonal().array() += mu * scale;
                const Vector step = Am.ldlt().solve(b);
                const Vector vt = v + step;
                if (step.allFinite() && residual(vt, Ft) && Ft.norm() < fn) {
                    v = vt;
                    F = Ft;
                    mu = std::max(mu / 10.0, 1e-12);
                    accepted = true;
                    break;
                }
                mu *= 8.0;
            }
            if (!accepted) break;
            // polish below eps until progress stalls
            if (F.norm() <= eps && F.norm() > 0.5 * fn) break;
        }
        s.velocity = v;
        s.endpoint_error = F.norm();
        s.converged = s.endpoint_error <= eps;
        s.tilde_length = tilde_length(v);
        return s;
    }
};

// Strict preference: converged, then shorter, then lower start index.
bool better(const ShootSolution& a, const ShootSolution& b) {
    if (a.converged != b.converged) return a.converged;
    if (a.converged) {
        if (a.tilde_length != b.tilde_length) return a.tilde_length < b.tilde_length;
    } else if (a.endpoint_error != b.endpoint_error) {
        return a.endpoint_error < b.endpoint_error;
    }
    return a.start < b.start;
}

}  // namespace

ConnectResult shoot_connect(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts) {
    m.require_domain(p);
    m.require_domain(q);
    if (opts.multistart == 0 || opts.max_iterations == 0) throw std::invalid_argument("shoot_connect: counts must be positive");
    const std::size_t n = m.dim();

    ConnectResult res;
    res.attempts = opts.multistart;
    if ((p - q).norm() == 0.0) {
        ShootSolution s;
        s.velocity = Vector::Zero(static_cast<Eigen::Index>(n));
        s.initial_guess = s.velocity;
        s.tilde_length = 0.0;
        s.endpoint_error = 0.0;
        s.converged = true;
        res.solutions.push_back(s);
        res.converged = true;
        res.tilde_length = 0.0;
        res.endpoint_error = 0.0;
        res.tilde_velocity = s.velocity;
        res.attempts = 1;
        for (auto* path : {&res.tilde_path, &res.nabla_path}) {
            path->samples.push_back({0.0, p, s.velocity});
            path->samples.push_back({1.0, p, s.velocity});
            path->exit_parameter = 1.0;
        }
        res.tilde_path.kind = ConnectionKind::LeviCivitaTilde;
        res.nabla_path.kind = ConnectionKind::Nabla;
        return res;
    }

    const Shooter shooter{m, p, q, opts};
    // Every start gets the e^sigma g speed of the straight chart segment p -> q
    // (an upper bound for the distance when the segment stays in the chart).
    // Raw chart displacements can be far too fast on strongly curved charts
    // and lead to geodesics that wind around before hitting q.
    const double speed = segment_length(m, p, q, shooter.tilde_length(q - p));
    auto scaled = [&](const Vector& d) {
        const double l = shooter.tilde_length(d);
        return l > 0.0 && std::isfinite(l) ? Vector(d * (speed / l)) : d;
    };
    std::vector<Vector> guesses;
    guesses.push_back(scaled(q - p));
    for (std::size_t k = 1; k < opts.multistart; ++k) guesses.push_back(scaled(sphere_direction(n, k, opts.seed)));

    std::vector<ShootSolution> sols(guesses.size());
    if (opts.parallel && guesses.size() > 1) {
        std::vector<std::future<ShootSolution>> futures;
        futures.reserve(guesses.size());
        for (std::size_t k = 0; k < guesses.size(); ++k)
            futures.push_back(std::async(std::launch::async, [&shooter, &guesses, k] { return shooter.run(k, guesses[k]); }));
        for (std::size_t k = 0; k < guesses.size(); ++k) sols[k] = futures[k].get();
    } else {
        for (std::size_t k = 0; k < guesses.size(); ++k) sols[k] = shooter.run(k, guesses[k]);
    }

    // Reparametrize converged branches; a branch whose Nabla parameter is not
    // representable is not a usable connection.
    IntegratorOpts io = opts.integrator;
    io.samples = std::max<std::size_t>(opts.path_samples, 4);
    auto build = [&](const ShootSolution& s, GeodesicPath& tilde, GeodesicPath& nabla) {
        tilde = integrate_geodesic(m, ConnectionKind::LeviCivitaTilde, p, s.velocity, 1.0, io);
        nabla = reparam_from_tilde(m, tilde);
        bool finite = std::isfinite(nabla.exit_parameter);
        for (const auto& smp : nabla.samples) finite = finite && smp.v.allFinite();
        return finite && tilde.status == PathStatus::Completed;
    };

    const ShootSolution* best = nullptr;
    for (auto& s : sols) {
        if (!best || better(s, *best)) best = &s;
    }
    // Walk converged candidates in preference order until one reparametrizes.
    std::vector<ShootSolution*> order;
    for (auto& s : sols) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const ShootSolution* a, const ShootSolution* b) { return better(*a, *b); });
    bool built = false;
    for (ShootSolution* s : order) {
        if (!s->converged) break;
        GeodesicPath tilde, nabla;
        if (build(*s, tilde, nabla)) {
            if (!built) {
                res.tilde_path = std::move(tilde);
                res.nabla_path = std::move(nabla);
                best = s;
                built = true;
            }
        } else {
            s->converged = false;
        }
    }
    for (const auto& s : sols)
        if (s.converged) res.solutions.push_back(s);

    if (built) {
        res.converged = true;
        res.best_start = best->start;
        res.tilde_velocity = best->velocity;
        res.tilde_length = best->tilde_length;
        res.endpoint_error = (res.tilde_path.back().x - q).norm();
        return res;
    }

    // No connection: report the branch with the smallest residual.
    const ShootSolution* closest = nullptr;
    for (const auto& s : sols)
        if (s.velocity.size() > 0 && (!closest || s.endpoint_error < closest->endpoint_error)) closest = &s;
    if (closest) {
        res.best_start = closest->start;
        res.tilde_velocity = closest->velocity;
        res.tilde_length = closest->tilde_length;
        res.endpoint_error = closest->endpoint_error;
        res.tilde_path = integrate_geodesic(m, ConnectionKind::LeviCivitaTilde, p, closest->velocity, 1.0, io);
    }
    return res;
}

double distance_tilde(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts) {
    if ((p - q).norm() == 0.0) {
        m.require_domain(p);
        return 0.0;
    }
    const ConnectResult r = shoot_connect(m, p, q, opts);
    if (!r.converged) throw NoConvergence("no converged geodesic", r.endpoint_error);
    return r.tilde_length;
}

DistanceReport distance_tilde_report(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts) {
    DistanceReport r;
    r.forward = distance_tilde(m, p, q, opts);
    r.backward = distance_tilde(m, q, p, opts);
    r.asymmetry = std::fabs(r.forward - r.backward);
    return r;
}

double contrast(const Manifold& m, const Coord& p, const Coord& q, const ShootOpts& opts) {
    if ((p - q).norm() == 0.0) {
        m.require_domain(p);
        return 0.0;
    }
    const double d = distance_tilde(m, p, q, opts);
    return std::exp(-m.sigma(p)) * d * d;
}

ContrastCheck contrast_structure_check(const Manifold& m, const Coord& p, double h, const ShootOpts& opts) {
    if (!(h > 0.0)) throw std::invalid_argument("contrast_structure_check: step must be positive");
    const std::size_t n = m.dim();
    const auto N = static_cast<Eigen::Index>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (double s : {-2.0, -1.0, 1.0, 2.0}) {
            Coord x = p;
            x[static_cast<Eigen::Index>(i)] += s * h;
            if (!m.in_domain(x)) throw OutOfDomain("contrast_structure_check: stencil leaves the domain");
        }

    // rho at integer offsets (in units of h) of both arguments, memoized.
    using Key = std::pair<std::vector<int>, std::vector<int>>;
    std::map<Key, double> memo;
    auto rho = [&](const std::vector<int>& a, const std::vector<int>& b) {
        const Key key{a, b};
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        Coord x = p, y = p;
        for (std::size_t i = 0; i < n; ++i) {
            x[static_cast<Eigen::Index>(i)] += h * a[i];
            y[static_cast<Eigen::Index>(i)] += h * b[i];
        }
        m.require_domain(x);
        m.require_domain(y);
        const double v = contrast(m, x, y, opts);
        memo.emplace(key, v);
        return v;
    };
    auto unit = [&](std::size_t i, int s) {
        std::vector<int> e(n, 0);
        e[i] = s;
        return e;
    };
    auto add = [](std::vector<int> a, const std::vector<int>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        return a;
    };

    // 4th-order central weights on offsets -2..2 (first and second derivative).
    static constexpr std::array<double, 5> d1{1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
    static constexpr std::array<double, 5> d2{-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

    // d/dq_k of rho at first-argument offset a
    auto dq = [&](const std::vector<int>& a, std::size_t k) {
        double s = 0.0;
        for (int c = -2; c <= 2; ++c)
            if (d1[c + 2] != 0.0) s += d1[c + 2] * rho(a, unit(k, c));
        return s / h;
    };

    ContrastCheck c;
    c.h = h;
    c.mixed = Matrix::Zero(N, N);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int a = -2; a <= 2; ++a)
                if (d1[a + 2] != 0.0) s += d1[a + 2] * dq(unit(i, a), j);
            c.mixed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s / h;
        }

    c.third = Tensor3(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                double s = 0.0;
                if (i == j) {
                    for (int a = -2; a <= 2; ++a) s += d2[a + 2] * dq(unit(i, a), k);
                } else {
                    for (int a = -2; a <= 2; ++a)
                        for (int b = -2; b <= 2; ++b)
                            if (d1[a + 2] != 0.0 && d1[b + 2] != 0.0)
                                s += d1[a + 2] * d1[b + 2] * dq(add(unit(i, a), unit(j, b)), k);
                }
                c.third(i, j, k) = s / (h * h);
            }

    const LocalJet J = m.jet(p, false);
    c.g = J.g;
    const Tensor3 G = connection_coeffs(J, ConnectionKind::Nabla);
    c.nabla_lowered = Tensor3(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                double s = 0.0;
                for (std::size_t l = 0; l < n; ++l) s += G(l, i, j) * J.g(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
                c.nabla_lowered(i, j, k) = s;
            }

    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            c.g_deviation = std::max(c.g_deviation, std::fabs(c.mixed(i, j) + c.g(i, j)));
            c.g_deviation_half = std::max(c.g_deviation_half, std::fabs(0.5 * c.mixed(i, j) + c.g(i, j)));
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                c.nabla_deviation = std::max(c.nabla_deviation, std::fabs(c.third(i, j, k) + c.nabla_lowered(i, j, k)));
                c.nabla_deviation_half =
                    std::max(c.nabla_deviation_half, std::fabs(0.5 * c.third(i, j, k) + c.nabla_lowered(i, j, k)));
            }
    const double gg = (c.g.array() * c.g.array()).sum();
    c.g_scale = -(c.mixed.array() * c.g.array()).sum() / gg;
    const Matrix sym = -0.5 * (c.mixed + c.mixed.transpose());
    c.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix>(sym).eigenvalues().minCoeff();
    return c;
}

}  // namespace divstat

#include "divstat/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace divstat {

namespace {

// Runs fn(i) for i in [0, count) on a few threads; results land by index so
// the outcome does not depend on scheduling.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, Fn fn) {
    std::vector<T> out(count);
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, std::max<std::size_t>(1, count / 4));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) out[i] = fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t idx) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Worst {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t index = 0;
    void take(double v, std::size_t i) {
        if (v > value || (std::isnan(v) && !std::isnan(value))) {
            value = v;
            index = i;
        }
    }
};

}  // namespace

std::string SampleSpec::str() const {
    if (!grid) return "random:" + std::to_string(count) + ":seed=" + std::to_string(seed);
    std::string s;
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (i) s += ',';
        s += "x" + std::to_string(i + 1) + ":" + fmt(axes[i].lo) + ":" + fmt(axes[i].hi) + ":" + std::to_string(axes[i].n);
    }
    return s;
}

SampleSpec parse_grid(const std::string& text, const Manifold& m) {
    SampleSpec spec;
    spec.grid = true;
    spec.axes.assign(m.dim(), {});
    std::vector<bool> seen(m.dim(), false);
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::vector<std::string> parts;
        std::stringstream is(item);
        std::string part;
        while (std::getline(is, part, ':')) parts.push_back(part);
        if (parts.size() != 4) throw std::invalid_argument("grid axis must be name:lo:hi:n, got '" + item + "'");
        const auto& coords = m.def().coords;
        const auto it = std::find(coords.begin(), coords.end(), parts[0]);
        if (it == coords.end()) throw std::invalid_argument("unknown grid coordinate '" + parts[0] + "'");
        const auto idx = static_cast<std::size_t>(it - coords.begin());
        if (seen[idx]) throw std::invalid_argument("grid coordinate '" + parts[0] + "' given twice");
        seen[idx] = true;
        SampleSpec::Axis ax;
        std::size_t pos = 0;
        try {
            ax.lo = std::stod(parts[1], &pos);
            if (pos != parts[1].size()) throw std::invalid_argument("");
            ax.hi = std::stod(parts[2], &pos);
            if (pos != parts[2].size()) throw std::invalid_argument("");
            const long long n = std::stoll(parts[3], &pos);
            if (pos != parts[3].size() || n < 1) throw std::invalid_argument("");
            ax.n = static_cast<std::size_t>(n);
        } catch (const std::exception&) {
            throw std::invalid_argument("malformed grid axis '" + item + "'");
        }
        if (!(ax.lo <= ax.hi)) throw std::invalid_argument("grid axis '" + item + "' has lo > hi");
        spec.axes[idx] = ax;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw std::invalid_argument("grid is missing coordinate '" + m.def().coords[i] + "'");
    return spec;
}

SampleSpec random_spec(std::size_t count, std::uint64_t seed) {
    SampleSpec s;
    s.count = count;
    s.seed = seed;
    return s;
}

std::vector<Coord> sample_points(const Manifold& m, const SampleSpec& spec) {
    std::vector<Coord> pts;
    const std::size_t n = m.dim();
    if (!spec.grid) {
        std::mt19937_64 rng(spec.seed);
        for (std::size_t i = 0; i < spec.count; ++i) pts.push_back(m.sample_point(rng));
        return pts;
    }
    if (spec.axes.size() != n) throw std::invalid_argument("grid dimension does not match the manifold");
    std::vector<std::size_t> idx(n, 0);
    while (true) {
        Coord x(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = spec.axes[i];
            x[static_cast<Eigen::Index>(i)] =
                a.n == 1 ? a.lo : a.lo + (a.hi - a.lo) * static_cast<double>(idx[i]) / static_cast<double>(a.n - 1);
        }
        if (m.in_domain(x)) pts.push_back(x);
        std::size_t d = n;
        while (d > 0) {
            --d;
            if (++idx[d] < spec.axes[d].n) break;
            idx[d] = 0;
            if (d == 0) return pts;
        }
        if (n == 0) return pts;
    }
}

bool ScanReport::pass() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.reported_only || c.pass; });
}

const CheckResult* ScanReport::find(const std::string& name) const noexcept {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

double hadamard_lhs(const LocalJet& J, const Vector& X0, const Vector& Y0) {
    const auto [X, Y] = orthonormalize_pair(J.g, X0, Y0);
    const Riem S = statistical_curvature(J);
    const Matrix H = hess_sigma(J);
    const double ds2 = J.dsigma.dot(J.ginv * J.dsigma);
    return 2.0 * X.dot(J.g * apply(S, X, Y, Y)) - (Y.dot(H * Y) + X.dot(H * X) + ds2);
}

double hadamard2d_lhs(const LocalJet& J) {
    if (J.n != 2) throw std::invalid_argument("hadamard2d requires a 2-dimensional manifold");
    const double k = sectional_g(J, Vector::Unit(2, 0), Vector::Unit(2, 1));
    const double ds2 = J.dsigma.dot(J.ginv * J.dsigma);
    return 2.0 * k + ds2 - laplace_sigma(J);
}

ScanReport hadamard_scan(const Manifold& m, const SampleSpec& spec, std::size_t planes, std::uint64_t seed, double tol) {
    const std::vector<Coord> pts = sample_points(m, spec);
    if (pts.empty()) throw std::invalid_argument("hadamard_scan: empty sample set");
    const std::size_t n = m.dim();
    if (n < 2) throw std::invalid_argument("hadamard_scan: dimension must be at least 2");

    const auto vals = parallel_map<double>(pts.size(), [&](std::size_t i) {
        const LocalJet J = m.jet(pts[i], true);
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                worst = std::max(worst, hadamard_lhs(J, Vector::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(a)),
                                                     Vector::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(b))));
        std::mt19937_64 rng(mix_seed(seed, i));
        std::normal_distribution<double> N01;
        for (std::size_t r = 0; r < planes; ++r) {
            Vector X(static_cast<Eigen::Index>(n)), Y(static_cast<Eigen::Index>(n));
            for (std::size_t c = 0; c < n; ++c) X[static_cast<Eigen::Index>(c)] = N01(rng);
            for (std::size_t c = 0; c < n; ++c) Y[static_cast<Eigen::Index>(c)] = N01(rng);
            try {
                worst = std::max(worst, hadamard_lhs(J, X, Y));
            } catch (const std::invalid_argument&) {
                // degenerate random pair; the coordinate planes already cover the point
            }
        }
        return worst;
    });

    Worst w;
    for (std::size_t i = 0; i < vals.size(); ++i) w.take(vals[i], i);
    ScanReport rep;
    rep.manifold = m.name();
    rep.sample_spec = spec.str();
    rep.points = pts.size();
    rep.tolerance = tol;
    CheckResult c;
    c.name = "hadamard";
    c.worst = w.value;
    c.worst_point = pts[w.index];
    c.tolerance = tol;
    c.pass = w.value <= tol;
    c.note = "max over points and planes of 2g(S(X,Y)Y,X) - (Hess(X,X) + Hess(Y,Y) + |ds|^2)";
    rep.checks.push_back(c);
    return rep;
}

ScanReport hadamard2d_scan(const Manifold& m, const SampleSpec& spec, double tol) {
    if (m.dim() != 2) throw std::invalid_argument("hadamard2d requires a 2-dimensional manifold");
    const std::vector<Coord> pts = sample_points(m, spec);
    if (pts.empty()) throw std::invalid_argument("hadamard2d_scan: empty sample set");
    const auto vals = parallel_map<double>(pts.size(), [&](std::size_t i) { return hadamard2d_lhs(m.jet(pts[i], true)); });
    Worst w;
    for (std::size_t i = 0; i < vals.size(); ++i) w.take(vals[i], i);
    ScanReport rep;
    rep.manifold = m.name();
    rep.sample_spec = spec.str();
    rep.points = pts.size();
    rep.tolerance = tol;
    CheckResult c;
    c.name = "hadamard2d";
    c.worst = w.value;
    c.worst_point = pts[w.index];
    c.tolerance = tol;
    c.pass = w.value <= tol;
    c.note = "max of 2k + |ds|^2 - Lap s";
    rep.checks.push_back(c);
    return rep;
}

SigmaBounds sigma_bounds_scan(const Manifold& m, const SampleSpec& spec) {
    const std::vector<Coord> pts = sample_points(m, spec);
    if (pts.empty()) throw std::invalid_argument("sigma_bounds_scan: empty sample set");
    SigmaBounds b;
    b.samples = pts.size();
    b.min = std::numeric_limits<double>::infinity();
    b.max = -b.min;
    for (const auto& x : pts) {
        const double s = m.sigma(x);
        if (s < b.min) b.min = s, b.argmin = x;
        if (s > b.max) b.max = s, b.argmax = x;
    }
    return b;
}

ScanReport check_suite(const Manifold& m, const SuiteOpts& opts) {
    const SampleSpec spec = random_spec(opts.samples, opts.seed);
    const std::vector<Coord> pts = sample_points(m, spec);
    if (pts.empty()) throw std::invalid_argument("check_suite: no sample points");
    const std::size_t n = m.dim();

    static const std::vector<std::string> names = {
        "metric_compatibility", "codazzi",       "cubic_symmetry",     "duality",
        "conjugate_sum",        "conformal_lc",  "projective",         "cubic_cross_check",
        "trace_identity",       "volume_parallel", "dual_pairing",     "levi_civita_split",
        "sum_rule",             "ricci_symmetry", "first_bianchi",     "sectional_tilde",
        "conjugate_symmetry",   "constant_curvature_lambda",
    };
    const std::size_t nchecks = names.size();

    struct PointResult {
        std::vector<double> v;
    };
    const auto res = parallel_map<PointResult>(pts.size(), [&](std::size_t i) {
        PointResult r;
        const LocalJet J = m.jet(pts[i], true);
        const StructureResiduals s = structure_residuals(J);
        const CurvatureRelations cr = curvature_relation_residuals(J);
        const Riem R = riemann(J, ConnectionKind::Nabla);
        double sect = 0.0;
        if (n >= 2) {
            std::mt19937_64 rng(mix_seed(opts.seed, i));
            std::normal_distribution<double> N01;
            Vector X(static_cast<Eigen::Index>(n)), Y(static_cast<Eigen::Index>(n));
            for (std::size_t c = 0; c < n; ++c) X[static_cast<Eigen::Index>(c)] = N01(rng);
            for (std::size_t c = 0; c < n; ++c) Y[static_cast<Eigen::Index>(c)] = N01(rng);
            const SectionalTilde st = sectional_tilde(J, X, Y);
            sect = std::fabs(st.direct - st.via_s);
        }
        r.v = {s.metric_compatibility, s.codazzi,         s.cubic_symmetry,     s.duality,
               s.conjugate_sum,        s.conformal_lc,    s.projective,         s.cubic_cross_check,
               s.trace_identity,       s.volume_parallel, cr.dual_pairing,      cr.levi_civita_split,
               cr.sum_rule,            ricci_asymmetry(ricci(J, ConnectionKind::Nabla)),
               first_bianchi_residual(R), sect,           conjugate_symmetry_residual(J),
               constant_curvature_fit(J)};
        return r;
    });

    ScanReport rep;
    rep.manifold = m.name();
    rep.sample_spec = spec.str();
    rep.points = pts.size();
    rep.tolerance = opts.tol;
    for (std::size_t c = 0; c + 1 < nchecks; ++c) {
        Worst w;
        for (std::size_t i = 0; i < res.size(); ++i) w.take(res[i].v[c], i);
        CheckResult cr;
        cr.name = names[c];
        cr.worst = w.value;
        cr.worst_point = pts[w.index];
        cr.tolerance = opts.tol;
        cr.pass = w.value <= opts.tol;
        if (names[c] == "conjugate_symmetry") {
            cr.reported_only = true;
            cr.pass = true;
            cr.note = "max |Hess s - (Lap s / n) g|; zero iff the structure is conjugate symmetric";
        }
        rep.checks.push_back(cr);
    }
    // Constant curvature: mean of the pointwise least-squares lambda, its
    // spread, and the residual of the mean.
    double mean = 0.0;
    for (const auto& r : res) mean += r.v.back();
    mean /= static_cast<double>(res.size());
    Worst spread;
    for (std::size_t i = 0; i < res.size(); ++i) spread.take(std::fabs(res[i].v.back() - mean), i);
    CheckResult cc;
    cc.name = names.back();
    cc.worst = mean;
    cc.worst_point = pts[spread.index];
    cc.reported_only = true;
    cc.tolerance = opts.tol;
    cc.pass = true;
    cc.note = "least-squares lambda (mean over samples); max deviation " + fmt(spread.value) +
              "; residual at the mean " + fmt(constant_curvature_residual(m.jet(pts[spread.index], true), mean));
    rep.checks.push_back(cc);
    return rep;
}

}  // namespace divstat

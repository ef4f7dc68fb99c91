#include "divstat/manifold.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>
#include <sstream>

namespace divstat {

namespace {

using json = nlohmann::json;

// Output layout of the jet tapes. Symmetric pairs are stored once (i <= j).
struct JetLayout {
    std::size_t n;
    std::size_t pairs;

    std::size_t pair(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return i * n - i * (i + 1) / 2 + j;
    }
    std::size_t sigma() const { return 0; }
    std::size_t dsigma(std::size_t i) const { return 1 + i; }
    std::size_t g(std::size_t i, std::size_t j) const { return 1 + n + pair(i, j); }
    std::size_t dg(std::size_t m, std::size_t i, std::size_t j) const { return 1 + n + pairs + m * pairs + pair(i, j); }
    std::size_t order1_size() const { return 1 + n + pairs + n * pairs; }
    std::size_t ddsigma(std::size_t i, std::size_t j) const { return order1_size() + pair(i, j); }
    std::size_t ddg(std::size_t m, std::size_t p, std::size_t i, std::size_t j) const {
        return order1_size() + pairs + pair(m, p) * pairs + pair(i, j);
    }
    std::size_t order2_size() const { return order1_size() + pairs + pairs * pairs; }
};

JetLayout layout_for(std::size_t n) { return {n, n * (n + 1) / 2}; }

std::vector<Expr> jet_outputs(const ManifoldDef& d, bool second_order) {
    const auto L = layout_for(d.dim);
    std::vector<Expr> out(second_order ? L.order2_size() : L.order1_size());
    const std::size_t n = d.dim;
    out[L.sigma()] = d.sigma;
    std::vector<Expr> ds(n);
    for (std::size_t i = 0; i < n; ++i) out[L.dsigma(i)] = ds[i] = d.sigma.diff(i);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const Expr& gij = d.metric[i][j];
            out[L.g(i, j)] = gij;
            for (std::size_t m = 0; m < n; ++m) {
                Expr dm = gij.diff(m);
                out[L.dg(m, i, j)] = dm;
                if (second_order)
                    for (std::size_t p = m; p < n; ++p) out[L.ddg(m, p, i, j)] = dm.diff(p);
            }
        }
    if (second_order)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) out[L.ddsigma(i, j)] = ds[i].diff(j);
    return out;
}

std::string point_text(const Coord& x) {
    std::ostringstream os;
    os.precision(17);
    os << '(';
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << ')';
    return os.str();
}

std::vector<std::string> default_coords(std::size_t n) {
    std::vector<std::string> c;
    for (std::size_t i = 0; i < n; ++i) c.push_back("x" + std::to_string(i + 1));
    return c;
}

ManifoldDef make_def(std::string name, std::size_t n, const std::string& domain, const std::vector<std::string>& diag,
                     const std::string& sigma, std::vector<std::pair<double, double>> box,
                     const std::string& extra = "") {
    ManifoldDef d;
    d.name = std::move(name);
    d.dim = n;
    d.coords = default_coords(n);
    d.domain_src = domain.empty() ? "true" : domain;
    d.domain = parse_predicate(domain, d.coords);
    d.metric.assign(n, std::vector<Expr>(n, Expr::constant(0.0)));
    for (std::size_t i = 0; i < n; ++i) d.metric[i][i] = parse(diag[i], d.coords);
    d.sigma = parse(sigma, d.coords);
    d.region.box = std::move(box);
    d.region.extra = parse_predicate(extra, d.coords);
    return d;
}

}  // namespace

Manifold::Manifold(ManifoldDef def) {
    if (def.dim < 2) throw ManifoldError("manifold dimension must be at least 2");
    if (def.coords.size() != def.dim) throw ManifoldError("coordinate count does not match dimension");
    if (def.metric.size() != def.dim) throw ManifoldError("metric row count does not match dimension");
    for (const auto& row : def.metric)
        if (row.size() != def.dim) throw ManifoldError("metric column count does not match dimension");
    for (std::size_t i = 0; i < def.dim; ++i)
        for (std::size_t j = i + 1; j < def.dim; ++j)
            if (!def.metric[i][j].same_as(def.metric[j][i]))
                throw ManifoldError("metric is not symmetric: entries (" + std::to_string(i + 1) + "," +
                                    std::to_string(j + 1) + ") and (" + std::to_string(j + 1) + "," +
                                    std::to_string(i + 1) + ") differ");
    if (def.region.box.empty()) def.region.box.assign(def.dim, {-2.0, 2.0});
    if (def.region.box.size() != def.dim) throw ManifoldError("sample box does not match dimension");
    def_ = std::make_shared<const ManifoldDef>(std::move(def));
    auto o1 = jet_outputs(*def_, false);
    auto o2 = jet_outputs(*def_, true);
    order1_ = std::make_shared<const Tape>(o1);
    order2_ = std::make_shared<const Tape>(o2);
}

bool Manifold::in_domain(const Coord& x) const noexcept {
    if (static_cast<std::size_t>(x.size()) != dim()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) return false;
    return def_->domain.holds(std::span<const double>(x.data(), dim()));
}

void Manifold::require_domain(const Coord& x) const {
    if (static_cast<std::size_t>(x.size()) != dim())
        throw OutOfDomain("point has " + std::to_string(x.size()) + " coordinates, manifold '" + name() +
                          "' has dimension " + std::to_string(dim()));
    if (!in_domain(x)) throw OutOfDomain("point " + point_text(x) + " is outside the domain of '" + name() + "'");
}

double Manifold::sigma(const Coord& x) const {
    require_domain(x);
    return def_->sigma.eval(std::span<const double>(x.data(), dim()));
}

Matrix Manifold::metric(const Coord& x) const { return jet(x, false).g; }
Matrix Manifold::metric_inverse(const Coord& x) const { return jet(x, false).ginv; }

LocalJet Manifold::jet(const Coord& x, bool second_order) const {
    require_domain(x);
    const std::size_t n = dim();
    const auto L = layout_for(n);
    const Tape& tape = second_order ? *order2_ : *order1_;
    thread_local std::vector<double> buf;
    buf.resize(tape.outputs());
    tape.eval(std::span<const double>(x.data(), n), buf);

    LocalJet J;
    J.n = n;
    J.second_order = second_order;
    J.x = x;
    const auto N = static_cast<Eigen::Index>(n);
    J.sigma = buf[L.sigma()];
    J.dsigma.resize(N);
    J.g.resize(N, N);
    J.dg = Tensor3(n);
    for (std::size_t i = 0; i < n; ++i) {
        J.dsigma[static_cast<Eigen::Index>(i)] = buf[L.dsigma(i)];
        for (std::size_t j = 0; j < n; ++j) {
            J.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[L.g(i, j)];
            for (std::size_t m = 0; m < n; ++m) J.dg(m, i, j) = buf[L.dg(m, i, j)];
        }
    }
    Eigen::LLT<Matrix> llt(J.g);
    if (llt.info() != Eigen::Success)
        throw ManifoldError("metric is not positive definite at " + point_text(x) + " on '" + name() + "'");
    J.ginv = llt.solve(Matrix::Identity(N, N));
    J.ginv = 0.5 * (J.ginv + J.ginv.transpose());

    // d_m g^ij = -g^ia (d_m g_ab) g^bj
    J.dginv = Tensor3(n);
    for (std::size_t m = 0; m < n; ++m) {
        Matrix dgm(N, N);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) dgm(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = J.dg(m, a, b);
        Matrix r = -J.ginv * dgm * J.ginv;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) J.dginv(m, i, j) = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    if (second_order) {
        J.ddsigma.resize(N, N);
        J.ddg = Tensor4(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                J.ddsigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[L.ddsigma(i, j)];
                for (std::size_t m = 0; m < n; ++m)
                    for (std::size_t p = 0; p < n; ++p) J.ddg(m, p, i, j) = buf[L.ddg(m, p, i, j)];
            }
    }
    return J;
}

Manifold Manifold::conjugate() const {
    ManifoldDef d = *def_;
    d.sigma = -d.sigma;
    if (d.name.starts_with("conjugate(") && d.name.ends_with(")"))
        d.name = d.name.substr(10, d.name.size() - 11);
    else
        d.name = "conjugate(" + d.name + ")";
    return Manifold(std::move(d));
}

void validate(const Manifold& m, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t s = 0; s < samples; ++s) {
        Coord x = m.sample_point(rng);
        Matrix g;
        try {
            g = m.jet(x, false).g;
        } catch (const ManifoldError&) {
            throw;
        } catch (const std::exception& e) {
            throw ManifoldError("metric evaluation failed at " + point_text(x) + ": " + e.what());
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= kSpdEpsilon)
            throw ManifoldError("metric is not positive definite at " + point_text(x) +
                                " (smallest eigenvalue " + std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
}

Manifold builtin_manifold(const std::string& name) {
    if (name == "euclidean")
        return Manifold(make_def(name, 2, "", {"1", "1"}, "0", {{-2, 2}, {-2, 2}}));
    if (name == "paraboloid") {
        const std::string conf = "2/(x1^2 + x2^2 + 1)";
        return Manifold(make_def(name, 2, "", {conf, conf}, "-log(0.5*(x1^2 + x2^2 + 1))", {{-2, 2}, {-2, 2}}));
    }
    if (name == "punctured-plane") {
        // g = e^{s} g_0 with s = 2/r^2; the structure potential is -s.
        const std::string conf = "exp(2/(x1^2 + x2^2))";
        return Manifold(make_def(name, 2, "x1^2 + x2^2 > 0", {conf, conf}, "-2/(x1^2 + x2^2)",
                                 {{-2, 2}, {-2, 2}}, "x1^2 + x2^2 > 0.49"));
    }
    if (name == "half-plane-exp") {
        const std::string conf = "1/x2^2";
        return Manifold(make_def(name, 2, "x2 > 0", {conf, conf}, "exp(-x2)", {{-2, 2}, {0.2, 3}}));
    }
    throw ManifoldError("unknown built-in manifold '" + name + "'");
}

std::vector<std::string> builtin_names() { return {"euclidean", "paraboloid", "punctured-plane", "half-plane-exp"}; }

Manifold load_manifold_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ManifoldError(std::string("manifold document is not valid JSON: ") + e.what());
    }
    if (doc.is_string()) return builtin_manifold(doc.get<std::string>());
    if (!doc.is_object()) throw ManifoldError("manifold document must be a JSON object");
    if (doc.contains("builtin")) return builtin_manifold(doc.at("builtin").get<std::string>());

    try {
        ManifoldDef d;
        d.name = doc.value("name", std::string("unnamed"));
        d.dim = doc.at("dim").get<std::size_t>();
        d.coords = doc.at("coords").get<std::vector<std::string>>();
        if (d.coords.size() != d.dim)
            throw ManifoldError("dimension mismatch: dim=" + std::to_string(d.dim) + " but " +
                                std::to_string(d.coords.size()) + " coordinate names");
        d.domain_src = doc.value("domain", std::string("true"));
        d.domain = parse_predicate(d.domain_src, d.coords);
        const auto& rows = doc.at("metric");
        if (!rows.is_array() || rows.size() != d.dim)
            throw ManifoldError("dimension mismatch: metric must have " + std::to_string(d.dim) + " rows");
        std::vector<std::vector<std::string>> src(d.dim);
        for (std::size_t i = 0; i < d.dim; ++i) {
            src[i] = rows[i].get<std::vector<std::string>>();
            if (src[i].size() != d.dim)
                throw ManifoldError("dimension mismatch: metric row " + std::to_string(i + 1) + " must have " +
                                    std::to_string(d.dim) + " entries");
        }
        d.metric.assign(d.dim, std::vector<Expr>(d.dim));
        for (std::size_t i = 0; i < d.dim; ++i)
            for (std::size_t j = 0; j < d.dim; ++j) {
                // An empty lower-triangle entry mirrors the upper triangle.
                if (i > j && src[i][j].empty()) {
                    d.metric[i][j] = d.metric[j][i];
                    continue;
                }
                d.metric[i][j] = parse(src[i][j], d.coords);
            }
        d.sigma = parse(doc.at("sigma").get<std::string>(), d.coords);
        if (doc.contains("sample_box")) {
            for (const auto& b : doc.at("sample_box")) d.region.box.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
        }
        if (doc.contains("sample_domain")) d.region.extra = parse_predicate(doc.at("sample_domain").get<std::string>(), d.coords);
        Manifold m(std::move(d));
        validate(m);
        return m;
    } catch (const ParseError& e) {
        throw ManifoldError(std::string("expression parse error: ") + e.what());
    } catch (const json::exception& e) {
        throw ManifoldError(std::string("manifold document does not match the schema: ") + e.what());
    }
}

Manifold load_manifold_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifoldError("cannot open manifold file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_manifold_json(ss.str());
}

Manifold resolve_manifold(const std::string& name_or_path) {
    for (const auto& b : builtin_names())
        if (b == name_or_path) return builtin_manifold(b);
    if (name_or_path.ends_with(".json")) return load_manifold_file(name_or_path);
    throw ManifoldError("unknown manifold '" + name_or_path + "' (not a built-in and not a .json file)");
}

// ---------------------------------------------------------------------------

Tensor3 christoffel_g(const LocalJet& J) {
    const std::size_t n = J.n;
    Tensor3 first(n);  // Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) first(l, i, j) = 0.5 * (J.dg(i, j, l) + J.dg(j, i, l) - J.dg(l, i, j));
    Tensor3 G(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < n; ++l)
                    s += J.ginv(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * first(l, i, j);
                G(k, i, j) = s;
                G(k, j, i) = s;
            }
    return G;
}

Tensor3 christoffel_g(const Manifold& m, const Coord& x) { return christoffel_g(m.jet(x, false)); }

Vector grad_sigma(const LocalJet& J) { return J.ginv * J.dsigma; }

Matrix hess_sigma(const LocalJet& J) {
    if (!J.second_order) throw std::invalid_argument("hess_sigma needs a second-order jet");
    const std::size_t n = J.n;
    const Tensor3 G = christoffel_g(J);
    const auto N = static_cast<Eigen::Index>(n);
    Matrix H(N, N);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = J.ddsigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            for (std::size_t k = 0; k < n; ++k) s -= G(k, i, j) * J.dsigma[static_cast<Eigen::Index>(k)];
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
            H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
        }
    return H;
}

double laplace_sigma(const LocalJet& J) { return (J.ginv.cwiseProduct(hess_sigma(J))).sum(); }

FrameVec grad_sigma(const Manifold& m, const Coord& x) { return {x, grad_sigma(m.jet(x, false))}; }
Matrix hess_sigma(const Manifold& m, const Coord& x) { return hess_sigma(m.jet(x, true)); }
double laplace_sigma(const Manifold& m, const Coord& x) { return laplace_sigma(m.jet(x, true)); }

double metric_compatibility_residual(const LocalJet& J) {
    const std::size_t n = J.n;
    const Tensor3 G = christoffel_g(J);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double r = J.dg(k, i, j);
                for (std::size_t l = 0; l < n; ++l) {
                    r -= G(l, k, i) * J.g(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j));
                    r -= G(l, k, j) * J.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
                }
                worst = std::max(worst, std::fabs(r));
            }
    return worst;
}

Matrix orthonormal_frame(const Matrix& g) {
    const Eigen::Index n = g.rows();
    Matrix E = Matrix::Identity(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        Vector v = E.col(a);
        for (Eigen::Index b = 0; b < a; ++b) v -= (E.col(b).dot(g * v)) * E.col(b);
        double norm = std::sqrt(v.dot(g * v));
        E.col(a) = v / norm;
    }
    return E;
}

std::pair<Vector, Vector> orthonormalize_pair(const Matrix& g, const Vector& X, const Vector& Y) {
    double xx = X.dot(g * X);
    double yy = Y.dot(g * Y);
    double xy = X.dot(g * Y);
    double gram = xx * yy - xy * xy;
    if (!(xx > 0.0) || !(yy > 0.0) || gram <= 1e-10 * xx * yy)
        throw std::invalid_argument("degenerate plane: the two vectors are (nearly) linearly dependent");
    Vector e1 = X / std::sqrt(xx);
    Vector w = Y - e1.dot(g * Y) * e1;
    Vector e2 = w / std::sqrt(w.dot(g * w));
    return {e1, e2};
}

}  // namespace divstat

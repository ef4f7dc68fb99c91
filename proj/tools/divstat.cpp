// divstat: command-line front end.
//
// Exit codes: 0 success/pass, 1 check or scan failure, 2 invalid input,
// 3 numerical failure.

#include "divstat/analyze.hpp"
#include "divstat/connect.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace divstat;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kInvalid = 2, kNumerical = 3;

struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Coord parse_coord(const std::string& text, std::size_t dim, const char* what) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw InvalidInput(std::string(what) + ": malformed number '" + item + "'");
        }
        if (pos != item.size() || !std::isfinite(v)) throw InvalidInput(std::string(what) + ": malformed number '" + item + "'");
        vals.push_back(v);
    }
    if (vals.size() != dim)
        throw InvalidInput(std::string(what) + ": expected " + std::to_string(dim) + " comma-separated values");
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Coord in_domain(const Manifold& m, const Coord& x, const char* what) {
    if (!m.in_domain(x)) throw InvalidInput(std::string(what) + " is outside the domain of " + m.name());
    return x;
}

json vec(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json mat(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

json t3(const Tensor3& t) {
    json a = json::array();
    for (std::size_t i = 0; i < t.dim(); ++i) {
        json b = json::array();
        for (std::size_t j = 0; j < t.dim(); ++j) {
            json c = json::array();
            for (std::size_t k = 0; k < t.dim(); ++k) c.push_back(t(i, j, k));
            b.push_back(c);
        }
        a.push_back(b);
    }
    return a;
}

json path_json(const GeodesicPath& p) {
    json s = json::array();
    for (const auto& x : p.samples) s.push_back({{"t", x.t}, {"x", vec(x.x)}, {"v", vec(x.v)}});
    return {{"kind", kind_name(p.kind)}, {"status", status_name(p.status)}, {"samples", s}};
}

json report_json(const ScanReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name},
                          {"worst", c.worst},
                          {"worst_point", vec(c.worst_point)},
                          {"pass", c.pass},
                          {"reported_only", c.reported_only},
                          {"tolerance", c.tolerance},
                          {"note", c.note}});
    }
    return {{"manifold", r.manifold}, {"sample_spec", r.sample_spec}, {"points", r.points},
            {"tolerance", r.tolerance}, {"pass", r.pass()},          {"checks", checks}};
}

std::string point_str(const Coord& x) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + num(x[i]);
    return s + ")";
}

void print_table(std::ostream& os, const ScanReport& r) {
    os << "manifold " << r.manifold << "  samples " << r.sample_spec << "  points " << r.points << "\n";
    for (const auto& c : r.checks) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-26s %-8s %24s  at %s", c.name.c_str(),
                      c.reported_only ? "report" : (c.pass ? "pass" : "FAIL"), num(c.worst).c_str(),
                      point_str(c.worst_point).c_str());
        os << line << "\n";
        if (!c.note.empty() && c.reported_only) os << "      " << c.note << "\n";
    }
}

void write_out(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot open output file '" + path + "'");
    f << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Statistical manifolds with divisible cubic forms"};
    app.require_subcommand(1);

    std::string manifold_src;
    auto add_manifold = [&](CLI::App* sub) {
        sub->add_option("manifold", manifold_src, "built-in name or path to a .json definition")->required();
    };

    // describe
    auto* describe = app.add_subcommand("describe", "structure tensors at a point (JSON)");
    add_manifold(describe);
    std::string at;
    describe->add_option("--at", at, "point x1,x2,...")->required();

    // geodesic
    auto* geodesic = app.add_subcommand("geodesic", "integrate a geodesic (CSV)");
    add_manifold(geodesic);
    std::string conn = "nabla", from, vel, out;
    double t_max = 1.0, rtol = 1e-9, atol = 1e-11;
    std::size_t steps = 200;
    geodesic->add_option("--conn", conn, "lc | nabla | bar | lc-tilde")
        ->check(CLI::IsMember({"lc", "nabla", "bar", "lc-tilde"}));
    geodesic->add_option("--from", from, "start point")->required();
    geodesic->add_option("--vel", vel, "initial velocity")->required();
    geodesic->add_option("--t-max", t_max, "final parameter")->required();
    geodesic->add_option("--steps", steps, "number of output intervals")->check(CLI::PositiveNumber);
    geodesic->add_option("--rtol", rtol)->check(CLI::PositiveNumber);
    geodesic->add_option("--atol", atol)->check(CLI::PositiveNumber);
    geodesic->add_option("--out", out, "CSV file (default stdout)");

    // connect
    auto* connect = app.add_subcommand("connect", "join two points by a Nabla-geodesic (JSON)");
    add_manifold(connect);
    std::string to;
    bool conjugate = false, with_samples = false;
    std::size_t multistart = 16;
    std::uint64_t seed = 42;
    connect->add_option("--from", from, "start point")->required();
    connect->add_option("--to", to, "end point")->required();
    connect->add_flag("--conjugate", conjugate, "apply sigma -> -sigma first");
    connect->add_option("--multistart", multistart)->check(CLI::PositiveNumber);
    connect->add_option("--seed", seed);
    connect->add_flag("--with-samples", with_samples, "include both paths in the JSON document");
    connect->add_option("--out", out, "JSON file (default stdout)");

    // contrast
    auto* contrast_cmd = app.add_subcommand("contrast", "canonical contrast rho(p,q)");
    add_manifold(contrast_cmd);
    std::string p_txt, q_txt;
    contrast_cmd->add_option("--p", p_txt)->required();
    contrast_cmd->add_option("--q", q_txt)->required();
    contrast_cmd->add_option("--seed", seed);
    contrast_cmd->add_option("--multistart", multistart)->check(CLI::PositiveNumber);

    // check
    auto* check = app.add_subcommand("check", "identity check suite at seeded random points");
    add_manifold(check);
    std::size_t samples = 100;
    double tol = 1e-8;
    check->add_option("--samples", samples)->check(CLI::PositiveNumber);
    check->add_option("--tol", tol)->check(CLI::PositiveNumber);
    check->add_option("--seed", seed);
    check->add_option("--json", out, "also write the JSON report to this file");

    // hadamard
    auto* hadamard = app.add_subcommand("hadamard", "Cartan-Hadamard condition scan");
    add_manifold(hadamard);
    std::string grid;
    std::size_t planes = 4;
    double htol = 1e-8;
    hadamard->add_option("--grid", grid, "x1:a:b:n,x2:a:b:n[,...]")->required();
    hadamard->add_option("--planes", planes, "random planes per point");
    hadamard->add_option("--seed", seed);
    hadamard->add_option("--tol", htol);
    hadamard->add_option("--json", out, "also write the JSON report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "divstat: " << e.what() << "\n";
        return kInvalid;
    }

    // Phase 1: inputs. Any failure here is invalid input.
    std::optional<Manifold> M;
    try {
        M.emplace(resolve_manifold(manifold_src));
        if (conjugate) M.emplace(M->conjugate());
    } catch (const std::exception& e) {
        std::cerr << "divstat: " << e.what() << "\n";
        return kInvalid;
    }
    const std::size_t n = M->dim();

    try {
        if (*describe) {
            const Coord x = in_domain(*M, parse_coord(at, n, "--at"), "--at");
            const LocalJet J = M->jet(x, true);
            json doc;
            doc["manifold"] = M->name();
            doc["point"] = vec(x);
            doc["g"] = mat(J.g);
            doc["g_inv"] = mat(J.ginv);
            doc["sigma"] = J.sigma;
            doc["dsigma"] = vec(J.dsigma);
            doc["grad_sigma"] = vec(grad_sigma(J));
            doc["hess_sigma"] = mat(hess_sigma(J));
            doc["laplace_sigma"] = laplace_sigma(J);
            doc["K"] = t3(difference_tensor(J));
            doc["C"] = t3(cubic_form(J));
            json gam;
            for (auto k : {ConnectionKind::LeviCivita, ConnectionKind::Nabla, ConnectionKind::NablaBar,
                           ConnectionKind::LeviCivitaTilde})
                gam[kind_name(k)] = t3(connection_coeffs(J, k));
            doc["Gamma"] = gam;
            doc["ricci_nabla"] = mat(ricci(J, ConnectionKind::Nabla));
            doc["conjugate_symmetry_residual"] = conjugate_symmetry_residual(J);
            std::cout << doc.dump(2) << "\n";
            return kOk;
        }

        if (*geodesic) {
            const Coord x0 = in_domain(*M, parse_coord(from, n, "--from"), "--from");
            const Vector v0 = parse_coord(vel, n, "--vel");
            if (!(t_max > 0.0)) throw InvalidInput("--t-max must be positive");
            IntegratorOpts o;
            o.samples = steps;
            o.rtol = rtol;
            o.atol = atol;
            const GeodesicPath path = integrate_geodesic(*M, parse_kind(conn), x0, v0, t_max, o);
            std::ostringstream os;
            write_csv(os, path);
            write_out(out, os.str());
            if (path.status == PathStatus::StepLimit || path.status == PathStatus::StepUnderflow) {
                std::cerr << "divstat: integration stopped (" << status_name(path.status) << ") at t=" << num(path.exit_parameter)
                          << "\n";
                return kNumerical;
            }
            if (path.status == PathStatus::ExitedDomain)
                std::cerr << "divstat: geodesic left the domain at t=" << num(path.exit_parameter) << "\n";
            return kOk;
        }

        if (*connect) {
            const Coord p = in_domain(*M, parse_coord(from, n, "--from"), "--from");
            const Coord q = in_domain(*M, parse_coord(to, n, "--to"), "--to");
            ShootOpts so;
            so.multistart = multistart;
            so.seed = seed;
            const ConnectResult r = shoot_connect(*M, p, q, so);
            json doc = {{"manifold", M->name()},
                        {"from", vec(p)},
                        {"to", vec(q)},
                        {"converged", r.converged},
                        {"tilde_length", r.converged ? json(r.tilde_length) : json(nullptr)},
                        {"endpoint_error", r.endpoint_error},
                        {"attempts", r.attempts},
                        {"initial_velocity", r.tilde_velocity.size() ? vec(r.tilde_velocity) : json(nullptr)}};
            json sols = json::array();
            for (const auto& s : r.solutions)
                sols.push_back({{"start", s.start}, {"velocity", vec(s.velocity)}, {"tilde_length", s.tilde_length},
                                {"endpoint_error", s.endpoint_error}});
            doc["solutions"] = sols;
            if (with_samples) {
                doc["samples"] = {{"tilde", path_json(r.tilde_path)}};
                if (r.converged) doc["samples"]["nabla"] = path_json(r.nabla_path);
            }
            write_out(out, doc.dump(2) + "\n");
            if (!r.converged) {
                std::cerr << "divstat: no converged geodesic (best endpoint error " << num(r.endpoint_error) << ")\n";
                return kNumerical;
            }
            return kOk;
        }

        if (*contrast_cmd) {
            const Coord p = in_domain(*M, parse_coord(p_txt, n, "--p"), "--p");
            const Coord q = in_domain(*M, parse_coord(q_txt, n, "--q"), "--q");
            ShootOpts so;
            so.multistart = multistart;
            so.seed = seed;
            std::cout << num(contrast(*M, p, q, so)) << "\n";
            return kOk;
        }

        if (*check) {
            SuiteOpts so;
            so.samples = samples;
            so.tol = tol;
            so.seed = seed;
            const ScanReport r = check_suite(*M, so);
            print_table(std::cout, r);
            if (!out.empty()) write_out(out, report_json(r).dump(2) + "\n");
            std::cout << (r.pass() ? "PASS" : "FAIL") << "\n";
            return r.pass() ? kOk : kCheckFailed;
        }

        if (*hadamard) {
            const SampleSpec spec = parse_grid(grid, *M);
            std::vector<ScanReport> reps;
            reps.push_back(hadamard_scan(*M, spec, planes, seed, htol));
            if (n == 2) reps.push_back(hadamard2d_scan(*M, spec, htol));
            const SigmaBounds sb = sigma_bounds_scan(*M, spec);
            json doc = json::array();
            bool pass = true;
            for (const auto& r : reps) {
                print_table(std::cout, r);
                doc.push_back(report_json(r));
                pass = pass && r.pass();
            }
            std::cout << "  sigma range (heuristic, sampled): [" << num(sb.min) << ", " << num(sb.max) << "]\n";
            if (!out.empty()) {
                json d = {{"scans", doc},
                          {"sigma_bounds",
                           {{"min", sb.min}, {"argmin", vec(sb.argmin)}, {"max", sb.max}, {"argmax", vec(sb.argmax)},
                            {"heuristic", true}}}};
                write_out(out, d.dump(2) + "\n");
            }
            std::cout << (pass ? "PASS" : "FAIL") << "\n";
            return pass ? kOk : kCheckFailed;
        }
    } catch (const InvalidInput& e) {
        std::cerr << "divstat: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::invalid_argument& e) {
        std::cerr << "divstat: " << e.what() << "\n";
        return kInvalid;
    } catch (const OutOfDomain& e) {
        std::cerr << "divstat: " << e.what() << "\n";
        return kInvalid;
    } catch (const NoConvergence& e) {
        std::cerr << "divstat: no converged geodesic (best endpoint error " << num(e.best_residual()) << ")\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "divstat: numerical failure: " << e.what() << "\n";
        return kNumerical;
    }
    return kOk;
}

#include "stopgame/cli.hpp"

#include "stopgame/mc.hpp"
#include "stopgame/solver.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace stopgame {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string g6(double v) { return fmt("%.6g", v); }
std::string g17(double v) { return fmt("%.17g", v); }

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string interval(double lo, double hi) { return "[" + g6(lo) + ", " + g6(hi) + "]"; }

void print_smooth_fit(std::ostream& out, const std::vector<SmoothFitEntry>& sf) {
    for (const auto& e : sf) {
        out << "smooth_fit x = " << g6(e.x) << " obstacle = " << e.obstacle << " slope = " << g6(e.slope)
            << " interval = " << interval(std::min(e.d_plus, e.d_minus), std::max(e.d_plus, e.d_minus))
            << " contained = " << (e.contained ? "yes" : "no") << "\n";
    }
}

void print_points(std::ostream& out, const ProblemConfig& cfg, const ValueFunction& V) {
    for (double x : cfg.points) out << "V(" << g6(x) << ") = " << fmt("%.10g", V(x)) << "\n";
}

void write_csv_file(const std::string& path, const TransformedObstacle& tob, const TautEnvelope& te,
                    const ValueFunction& V) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
    write_csv(f, tob, te, V);
}

bool is_israeli(const ProblemConfig& cfg) {
    return std::holds_alternative<GeometricBM>(cfg.diffusion.kind) && cfg.payoff.H &&
           cfg.payoff.constants.count("K") && cfg.payoff.constants.count("delta");
}

double default_x0(const ProblemConfig& cfg) {
    if (cfg.x0) return *cfg.x0;
    auto it = cfg.payoff.constants.find("K");
    if (it != cfg.payoff.constants.end() && it->second > cfg.diffusion.lo && it->second < cfg.diffusion.hi)
        return it->second;
    return 0.5 * (cfg.diffusion.lo + cfg.diffusion.hi);
}

Thresholds around(const std::vector<Interval>& set, double x) {
    Thresholds t;
    for (const auto& iv : set) {
        if (iv.contains(x)) return {x, x};
        if (iv.hi < x) t.lo = std::max(t.lo, iv.hi);
        if (iv.lo > x) t.hi = std::min(t.hi, iv.lo);
    }
    return t;
}

int run_solve(const ProblemConfig& cfg, const std::string& csv, std::ostream& out, std::ostream& err) {
    if (cfg.payoff.H) {
        err << "error: config defines payoff.H; use `game` for two-player problems\n";
        return kExitConfig;
    }
    auto sol = solve_stopping(cfg.diffusion, cfg.payoff, cfg.solve);
    out << "problem = stopping\n";
    for (std::size_t k = 0; k < sol.thresholds.size(); ++k) {
        if (sol.thresholds.size() > 1) out << "# stopping component " << k + 1 << "\n";
        out << "a_star = " << g6(sol.thresholds[k].a_star) << "\n";
        out << "b_star = " << g6(sol.thresholds[k].b_star) << "\n";
    }
    if (sol.thresholds.empty()) out << "stopping_region = empty\n";
    print_points(out, cfg, sol.V);
    out << "dual_route_discrepancy = " << fmt("%.3g", sol.dual_route_discrepancy) << "\n";
    print_smooth_fit(out, sol.smooth_fit);
    if (!csv.empty()) write_csv_file(csv, sol.tob, sol.te, sol.V);
    return kExitOk;
}

int run_game(const ProblemConfig& cfg, const std::string& csv, std::ostream& out, std::ostream& err) {
    if (!cfg.payoff.H) {
        err << "error: config has no payoff.H; use `solve` for single-player problems\n";
        return kExitConfig;
    }
    auto sol = solve_game(cfg.diffusion, cfg.payoff, cfg.solve);
    out << "problem = game\n";
    out << "equilibrium = " << to_string(sol.equilibrium) << "\n";
    for (const auto& d : sol.D_plus) out << "D+ = " << interval(d.lo, d.hi) << "\n";
    for (const auto& d : sol.D_minus) out << "D- = " << interval(d.lo, d.hi) << "\n";
    if (sol.D_minus.empty()) out << "D- = empty\n";
    if (cfg.x0) {
        auto [tl, th] = sol.tau_thresholds(*cfg.x0);
        auto [sl, sh] = sol.sigma_thresholds(*cfg.x0);
        out << "tau_star = " << interval(tl, th) << "\n";
        out << "sigma_star = " << interval(sl, sh) << "\n";
    }
    if (is_israeli(cfg)) {
        const auto& g = std::get<GeometricBM>(cfg.diffusion.kind);
        const double K = cfg.payoff.constants.at("K"), delta = cfg.payoff.constants.at("delta");
        out << "delta_star = " << fmt("%.10g", israeli_delta_star(K, cfg.diffusion.rate_r, g.sigma)) << "\n";
        if (!sol.D_plus.empty() && !sol.D_minus.empty()) {
            const double beta = 1.0 + 2.0 * cfg.diffusion.rate_r / (g.sigma * g.sigma);
            const double u = sol.D_plus.front().hi / K;
            const double res = beta * (1.0 + delta / K) * u - (beta - 1.0) - std::pow(u, beta);
            out << "x_star = " << fmt("%.10g", sol.D_plus.front().hi) << "\n";
            out << "x_star_residual = " << fmt("%.3g", res) << "\n";
        }
    }
    print_points(out, cfg, sol.V);
    print_smooth_fit(out, sol.smooth_fit);
    if (!csv.empty()) write_csv_file(csv, sol.tob, sol.te, sol.V);
    return kExitOk;
}

struct Row {
    std::string name;
    double analytic, mc, se;
};

int run_verify(ProblemConfig cfg, std::optional<std::size_t> paths, std::optional<double> dt,
               std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
    if (paths) cfg.mc.paths = *paths;
    if (dt) cfg.mc.dt = *dt;
    if (seed) cfg.mc.seed = *seed;
    const double x0 = default_x0(cfg);
    const auto& spec = cfg.diffusion;
    std::vector<Row> rows;
    std::optional<SaddleReport> saddle;

    if (!cfg.payoff.H) {
        auto sol = solve_stopping(spec, cfg.payoff, cfg.solve);
        Thresholds tau = around(sol.D, x0);
        PayoffExpr one = parse("1", {});
        std::vector<McTarget> targets{{&cfg.payoff.G, nullptr, tau, {}}, {&one, nullptr, tau, {}}};
        auto est = simulate_multi(spec, x0, targets, cfg.mc, resolve_horizon(spec, cfg.payoff, cfg.mc));
        auto fund = fundamental_solutions(spec);
        auto lap = exit_laplace(fund, x0, tau.lo, tau.hi);
        rows.push_back({"V(x0)", sol.V(x0), est[0].mean, est[0].std_error});
        rows.push_back({"E[exp(-r tau)]", lap.p_lower + lap.p_upper, est[1].mean, est[1].std_error});
    } else {
        auto sol = solve_game(spec, cfg.payoff, cfg.solve);
        auto [tl, th] = sol.tau_thresholds(x0);
        auto [sl, sh] = sol.sigma_thresholds(x0);
        const bool positive = spec.a >= 0.0;
        auto move = [&](double t, double f) { return positive ? t * f : x0 + f * (t - x0); };
        std::vector<Perturbation> perts;
        auto add = [&](Perturbation::Player pl, Thresholds base) {
            const char* who = pl == Perturbation::Player::Tau ? "tau" : "sigma";
            for (double f : {0.8, 0.9, 1.1, 1.2}) {
                for (int end = 0; end < 2; ++end) {
                    Thresholds t = base;
                    double& e = end == 0 ? t.lo : t.hi;
                    if (!std::isfinite(e) || e == x0) continue;
                    e = move(e, f);
                    if (!(t.lo < x0 && x0 < t.hi)) continue;
                    perts.push_back({pl, t, std::string(who) + "' = " + interval(t.lo, t.hi)});
                }
            }
        };
        if (!(tl == x0)) add(Perturbation::Player::Tau, {tl, th});
        perts.push_back({Perturbation::Player::Tau, {x0, x0}, "tau' = stop now"});
        if (!(sl == x0)) add(Perturbation::Player::Sigma, {sl, sh});
        perts.push_back({Perturbation::Player::Sigma, {-kInf, kInf}, "sigma' = never"});
        saddle = saddle_check(spec, cfg.payoff, x0, sol, perts, cfg.mc);
        rows.push_back({"V(x0)", sol.V(x0), saddle->base.mean, saddle->base.std_error});
    }

    out << "x0 = " << g6(x0) << "\n";
    out << "paths = " << cfg.mc.paths << " dt = " << g6(cfg.mc.dt) << " seed = " << cfg.mc.seed << "\n";
    out << "quantity analytic mc se z status\n";
    bool all_ok = true, inconclusive = false;
    for (const auto& r : rows) {
        const double allowance = 0.005 * std::fabs(r.analytic);
        const double excess = std::max(0.0, std::fabs(r.mc - r.analytic) - allowance);
        const double z = r.se > 0.0 ? excess / r.se : (excess > 0.0 ? kInf : 0.0);
        std::string status;
        if (r.se > 0.05 * std::fabs(r.analytic)) {
            status = "INCONCLUSIVE";
            inconclusive = true;
        } else if (z <= 3.0) {
            status = "PASS";
        } else {
            status = "FAIL";
            all_ok = false;
        }
        out << r.name << " " << fmt("%.8g", r.analytic) << " " << fmt("%.8g", r.mc) << " " << fmt("%.3g", r.se)
            << " " << fmt("%.3g", z) << " " << status << "\n";
    }
    if (saddle) {
        for (const auto& e : saddle->entries) {
            out << "saddle " << e.pert.label << " diff = " << fmt("%.4g", e.diff) << " se = " << fmt("%.3g", e.se_diff)
                << " " << (e.pass ? "PASS" : "FAIL") << "\n";
            all_ok = all_ok && e.pass;
        }
    }
    if (inconclusive && all_ok) {
        err << "warning: standard error above 5% of the value; increase --paths\n";
        out << "verify = INCONCLUSIVE\n";
        return kExitOk;
    }
    out << "verify = " << (all_ok ? "PASS" : "FAIL") << "\n";
    return all_ok ? kExitOk : kExitConfig;
}

}  // namespace

ExitCode exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ConfigError:
        case ErrorCode::SyntaxError:
        case ErrorCode::UnknownIdentifier:
        case ErrorCode::ArityMismatch:
        case ErrorCode::ObstacleOrderViolation:
        case ErrorCode::UnsupportedParameters:
        case ErrorCode::TabulationInvalid:
        case ErrorCode::OrderingViolated:
        case ErrorCode::OutOfRange:
            return kExitConfig;
        case ErrorCode::NoFiniteValue:
        case ErrorCode::GrowthViolation:
        case ErrorCode::EndsNotAnchored:
        case ErrorCode::AnchorBelowF:
            return kExitAssumption;
        default:
            return kExitNumeric;
    }
}

double israeli_delta_star(double K, double r, double sigma) {
    const double k = sigma * sigma / (2.0 * r);
    return k * K / std::pow(1.0 + k, 1.0 + 1.0 / k);
}

std::string example_config(const std::string& name, double K, double r, double sigma, double delta) {
    std::ostringstream os;
    os << (name == "israeli-put" ? "# cancellable perpetual put: the writer may cancel by paying K - x + delta\n"
                                 : "# perpetual American put under geometric Brownian motion\n");
    os << "diffusion.kind = gbm\n";
    os << "diffusion.rate = " << shortest(r) << "\n";
    os << "diffusion.sigma = " << shortest(sigma) << "\n";
    os << "payoff.const.K = " << shortest(K) << "\n";
    os << "payoff.G = max(K - x, 0)\n";
    if (name == "israeli-put") {
        if (delta < 0.0) delta = 0.5 * israeli_delta_star(K, r, sigma);
        os << "payoff.const.delta = " << shortest(delta) << "\n";
        os << "payoff.H = max(K - x, 0) + delta\n";
    } else if (name != "put") {
        throw Error(ErrorCode::ConfigError, "unknown example '" + name + "' (expected put or israeli-put)");
    }
    os << "grid.n = 4097\n";
    os << "grid.spacing = log_x\n";
    // Between the two stopping regions the saddle check has something to test.
    os << "mc.x0 = " << shortest(name == "israeli-put" ? 0.78 * K : K) << "\n";
    return os.str();
}

void write_csv(std::ostream& os, const TransformedObstacle& tob, const TautEnvelope& te, const ValueFunction& V) {
    if (!tob.st) throw Error(ErrorCode::ConfigError, "CSV export needs a solution built from a diffusion");
    const auto& st = *tob.st;
    const auto& fund = st.fund();
    os << "x,y,psi,phi,WG,WH,V_scaled,V,eps_star,delta_star,region\n";
    for (std::size_t i = 0; i < tob.size(); ++i) {
        const double x = st.x_grid()[i];
        const double v = V(x);
        const char* region = te.contact_lower[i] ? (te.contact_upper[i] ? "BOTH" : "D+")
                                                 : (te.contact_upper[i] ? "D-" : "C");
        os << g17(x) << ',' << g17(tob.y[i]) << ',' << g17(fund.psi(x)) << ',' << g17(fund.phi(x)) << ','
           << g17(tob.wg[i]) << ',' << g17(tob.upper(i)) << ',' << g17(v / st.den(x)) << ',' << g17(v) << ','
           << g17(te.eps_star[i]) << ',' << g17(te.delta_star[i]) << ',' << region << '\n';
    }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal stopping and Dynkin game solver"};
    app.require_subcommand(1);

    std::string config, csv;
    auto* solve = app.add_subcommand("solve", "solve a single-player stopping problem");
    solve->add_option("config", config, "problem file")->required();
    solve->add_option("-o,--out", csv, "CSV output path");

    auto* game = app.add_subcommand("game", "solve a two-player stopping game");
    game->add_option("config", config, "problem file")->required();
    game->add_option("-o,--out", csv, "CSV output path");

    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::optional<std::uint64_t> seed;
    auto* verify = app.add_subcommand("verify", "compare the solution with Monte Carlo estimates");
    verify->add_option("config", config, "problem file")->required();
    verify->add_option("--paths", paths, "number of paths");
    verify->add_option("--dt", dt, "Euler step");
    verify->add_option("--seed", seed, "RNG seed");

    std::string ex_name;
    double K = 100.0, r = 0.05, sigma = 0.3, delta = -1.0;
    bool print_config = false;
    auto* example = app.add_subcommand("example", "run a built-in example: put | israeli-put");
    example->add_option("name", ex_name, "put or israeli-put")->required();
    example->add_option("--K", K, "strike");
    example->add_option("--r", r, "interest and discount rate");
    example->add_option("--sigma", sigma, "volatility");
    example->add_option("--delta", delta, "cancellation premium (default: half the critical value)");
    example->add_flag("--print-config", print_config, "print the config text instead of solving");
    example->add_option("-o,--out", csv, "CSV output path");

    auto* exp = app.add_subcommand("export", "write the grid CSV of a problem");
    exp->add_option("config", config, "problem file")->required();
    exp->add_option("-o,--out", csv, "CSV output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*solve) return run_solve(load_config(config), csv, out, err);
        if (*game) return run_game(load_config(config), csv, out, err);
        if (*verify) return run_verify(load_config(config), paths, dt, seed, out, err);
        if (*example) {
            std::string text = example_config(ex_name, K, r, sigma, delta);
            if (print_config) {
                out << text;
                return kExitOk;
            }
            ProblemConfig cfg = parse_config(text, "example:" + ex_name);
            return cfg.payoff.H ? run_game(cfg, csv, out, err) : run_solve(cfg, csv, out, err);
        }
        if (*exp) {
            ProblemConfig cfg = load_config(config);
            std::ostringstream buf;
            if (cfg.payoff.H) {
                auto sol = solve_game(cfg.diffusion, cfg.payoff, cfg.solve);
                write_csv(buf, sol.tob, sol.te, sol.V);
            } else {
                auto sol = solve_stopping(cfg.diffusion, cfg.payoff, cfg.solve);
                write_csv(buf, sol.tob, sol.te, sol.V);
            }
            if (csv.empty()) {
                out << buf.str();
            } else {
                std::ofstream f(csv);
                if (!f) throw Error(ErrorCode::ConfigError, "cannot write '" + csv + "'");
                f << buf.str();
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        if (e.code() == ErrorCode::EndsNotAnchored)
            err << "hint: the obstacles do not meet at a boundary; set game.w0 or check the equilibrium class\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitConfig;
}

}  // namespace stopgame

// End-to-end checks of the solver against closed forms, brute-force oracles
// and simulation. Prints one PASS/FAIL line per criterion.

#include "stopgame/barrier.hpp"
#include "stopgame/cli.hpp"
#include "stopgame/config.hpp"
#include "stopgame/envelope.hpp"
#include "stopgame/mc.hpp"
#include "stopgame/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace stopgame;

namespace {

const double K = 100.0, r = 0.05, sigma = 0.3;
const double gam = 2.0 * r / (sigma * sigma);  // psi = x^-gam
const double alpha = 1.0 / (1.0 + gam);

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

DiffusionSpec gbm() {
    DiffusionSpec s;
    s.kind = GeometricBM{r, sigma};
    s.rate_r = r;
    s.a = 0.0;
    return with_default_truncation(s, K);
}

SolveOptions opts() {
    SolveOptions o;
    o.n = 4097;
    o.spacing = Spacing::LogX;
    return o;
}

PayoffSpec put() { return make_payoff("max(K - x, 0)", std::nullopt, {{"K", K}}); }

PayoffSpec cancellable(double delta) {
    return make_payoff("max(K - x, 0)", std::string("max(K - x, 0) + delta"), {{"K", K}, {"delta", delta}});
}

// Closed forms of the perpetual put.
const double put_x_star = K / (1.0 + sigma * sigma / (2.0 * r));

double put_value(double x) {
    return x <= put_x_star ? K - x : (K - put_x_star) * std::pow(x / put_x_star, -gam);
}

double delta_star_closed() {
    double k = sigma * sigma / (2.0 * r);
    return k * K / std::pow(1.0 + k, 1.0 + 2.0 * r / (sigma * sigma));
}

// Cancellation threshold: root of beta (1 + delta/K) u - (beta - 1) - u^beta
// in (x_put / K, 1), by bisection.
double ky_residual(double x, double delta) {
    double beta = 1.0 + gam, u = x / K;
    return beta * (1.0 + delta / K) * u - (beta - 1.0) - std::pow(u, beta);
}

double ky_root(double delta) {
    double lo = put_x_star, hi = K;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (ky_residual(mid, delta) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

// Three-branch value of the cancellable put, linear in y = x^(-1/alpha)
// between the two thresholds after dividing by x.
double cancellable_value(double x, double delta, double xs) {
    if (x >= K) return delta * std::pow(x / K, 1.0 - 1.0 / alpha);
    if (x <= xs) return K - x;
    double yK = std::pow(K, -1.0 / alpha), ys = std::pow(xs, -1.0 / alpha), y = std::pow(x, -1.0 / alpha);
    double vK = delta / K, vs = K * std::pow(ys, alpha) - 1.0;
    return x * (vs + (vK - vs) * (y - ys) / (yK - ys));
}

std::vector<double> log_samples(double lo, double hi, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, i / double(n - 1)));
    return out;
}

TransformedObstacle random_corridor(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> y(n), g(n), h(n);
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t += 0.1 + U(rng);
        y[i] = t;
        g[i] = 2.0 * U(rng) - 1.0;
        h[i] = g[i] + 1.5 * U(rng);
    }
    g.front() = h.front() = 0.5 * (g.front() + h.front());
    g.back() = h.back() = 0.5 * (g.back() + h.back());
    return make_corridor(y, g, h);
}

std::vector<TransformedObstacle> corridor_suite() {
    std::mt19937_64 rng(20240601);
    std::vector<TransformedObstacle> out;
    // The brute-force oracle is O(n^4); most corridors are small, a few go up
    // to the size limit.
    for (std::size_t k = 0; k < 45; ++k) out.push_back(random_corridor(rng, 5 + k * 59 / 44));
    for (std::size_t n : {96, 128, 160, 200, 257}) out.push_back(random_corridor(rng, n));
    return out;
}

// Smallest concave majorant over all chords between samples.
std::vector<double> chord_oracle(const std::vector<double>& y, const std::vector<double>& f) {
    std::vector<double> out(f);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t a = 0; a <= i; ++a)
            for (std::size_t b = i; b < y.size(); ++b)
                if (a != b) out[i] = std::max(out[i], f[a] + (y[i] - y[a]) / (y[b] - y[a]) * (f[b] - f[a]));
    return out;
}

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome criterion1() {
    auto t0 = Clock::now();
    auto sol = solve_stopping(gbm(), put(), opts());
    double secs = seconds_since(t0);
    double xs = sol.thresholds.at(0).b_star;
    double worst = 0.0;
    for (double x : log_samples(put_x_star, 3.0 * K, 50)) worst = std::max(worst, rel_err(sol.V(x), put_value(x)));
    bool ok = std::fabs(xs - put_x_star) <= 1e-3 && worst <= 1e-4 && secs < 1.0;
    return {ok, "x* = " + fmt("%.6f", xs) + " (|err| " + fmt("%.2e", std::fabs(xs - put_x_star)) +
                    "), max rel V err " + fmt("%.2e", worst) + ", " + fmt("%.3f", secs) + " s"};
}

Outcome criterion2() {
    double ds = delta_star_closed();
    double lib = israeli_delta_star(K, r, sigma);
    bool ok = rel_err(lib, ds) <= 1e-10;
    std::string detail = "delta* = " + fmt("%.10f", lib) + " (rel " + fmt("%.1e", rel_err(lib, ds)) + ")";

    double delta = 0.5 * ds;
    auto game = solve_game(gbm(), cancellable(delta), opts());
    if (game.equilibrium != Equilibrium::NashSaddle || game.D_plus.empty()) return {false, detail + ", no saddle"};
    double xs = game.D_plus.front().hi;
    double res = std::fabs(ky_residual(xs, delta));
    ok = ok && res <= 1e-8;
    double xs_ref = ky_root(delta);
    double worst = 0.0;
    for (double x : log_samples(1.0, 3.0 * K, 50))
        worst = std::max(worst, rel_err(game.V(x), cancellable_value(x, delta, xs_ref)));
    ok = ok && worst <= 1e-3;
    detail += ", x* = " + fmt("%.8f", xs) + " residual " + fmt("%.1e", res) + ", max rel V err " + fmt("%.2e", worst);

    auto big = solve_game(gbm(), cancellable(2.0 * ds), opts());
    auto single = solve_stopping(gbm(), put(), opts());
    double worst_put = 0.0;
    for (double x : log_samples(1.0, 3.0 * K, 50)) worst_put = std::max(worst_put, rel_err(big.V(x), single.V(x)));
    ok = ok && big.equilibrium == Equilibrium::Degenerate && worst_put <= 1e-6;
    detail += ", 2 delta*: " + to_string(big.equilibrium) + " (rel diff to put " + fmt("%.1e", worst_put) + ")";
    return {ok, detail};
}

Outcome criterion3(const std::vector<TransformedObstacle>& suite) {
    const SupInfSide sides[] = {SupInfSide::SupSup, SupInfSide::InfInf, SupInfSide::InfSup, SupInfSide::SupInf};
    double worst = 0.0;
    std::size_t contact_mismatch = 0;
    for (const auto& tob : suite) {
        auto te = taut_string(tob);
        worst = std::max(worst, sup_diff(te.values, double_obstacle_fixpoint(tob).values));
        for (auto side : sides) worst = std::max(worst, sup_diff(te.values, supinf_bruteforce(tob, side)));
        for (std::size_t i = 0; i < tob.size(); ++i) {
            auto [sub, super] = modified_differentials(te, tob, i);
            if (te.contact_lower[i] != !super.empty() || te.contact_upper[i] != !sub.empty()) ++contact_mismatch;
        }
    }
    return {worst <= 1e-8 && contact_mismatch == 0,
            "50 corridors, max sup diff " + fmt("%.2e", worst) + ", contact mismatches " +
                std::to_string(contact_mismatch)};
}

Outcome criterion4() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    bool exact = true;
    for (int k = 0; k < 100; ++k) {
        std::size_t n = 3 + std::size_t(k) % 62;
        std::vector<double> y, f;
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            t += 0.05 + U(rng);
            y.push_back(t);
            f.push_back(4.0 * U(rng) - 2.0);
        }
        auto e = least_concave_majorant(y, f);
        worst = std::max(worst, sup_diff(e.values, biconjugate_from_conjugate(y, f, secant_slopes(y, f))));
        worst = std::max(worst, sup_diff(e.values, tangent_envelope(y, f)));
        worst = std::max(worst, sup_diff(e.values, chord_oracle(y, f)));

        exact = exact && least_concave_majorant(y, e.values).values == e.values;
        std::vector<double> g(f);
        for (double& v : g) v += U(rng);
        auto eg = least_concave_majorant(y, g);
        for (std::size_t i = 0; i < n; ++i) exact = exact && eg.values[i] >= e.values[i];
    }
    return {worst <= 1e-9 && exact, "100 instances, max diff " + fmt("%.2e", worst) +
                                        (exact ? ", idempotent and monotone" : ", idempotence/monotonicity broken")};
}

Outcome criterion5() {
    auto spec = gbm();
    auto payoff = put();
    auto sol = solve_stopping(spec, payoff, opts());
    const double x0 = 100.0, y = 50.0;
    McConfig cfg;
    cfg.paths = 100000;
    cfg.dt = 1e-3;
    cfg.seed = 42;
    cfg.threads = 1;
    auto one = parse("1", {});
    std::vector<McTarget> targets{
        {&payoff.G, nullptr, Thresholds{sol.thresholds.at(0).b_star, kInf}, Thresholds{}},
        {&one, nullptr, Thresholds{y, kInf}, Thresholds{}},
    };
    auto t0 = Clock::now();
    auto est = simulate_multi(spec, x0, targets, cfg, resolve_horizon(spec, payoff, cfg));
    double secs = seconds_since(t0);

    double v = put_value(x0);
    double lap = std::pow(x0 / y, -gam);  // psi(x0) / psi(y)
    double dv = std::fabs(est[0].mean - v), dl = std::fabs(est[1].mean - lap);
    bool ok = dv <= 3.0 * est[0].std_error + 0.005 * v && dl <= 3.0 * est[1].std_error && secs < 60.0;
    return {ok, "V^ = " + fmt("%.4f", est[0].mean) + " vs " + fmt("%.4f", v) + " (se " + fmt("%.3f", est[0].std_error) +
                    "), Laplace " + fmt("%.5f", est[1].mean) + " vs " + fmt("%.5f", lap) + " (se " +
                    fmt("%.5f", est[1].std_error) + "), " + fmt("%.1f", secs) + " s"};
}

Outcome criterion6() {
    const double delta = 0.5 * delta_star_closed(), x0 = 78.0;
    auto payoff = cancellable(delta);
    auto sol = solve_game(gbm(), payoff, opts());
    auto [tl, th] = sol.tau_thresholds(x0);
    auto [sl, sh] = sol.sigma_thresholds(x0);
    std::vector<Perturbation> perts;
    for (double f : {0.8, 0.9, 1.1, 1.2}) perts.push_back({Perturbation::Player::Tau, {tl * f, th}, ""});
    perts.push_back({Perturbation::Player::Tau, {x0, x0}, ""});
    for (double f : {0.8, 0.9, 1.1, 1.2}) perts.push_back({Perturbation::Player::Sigma, {sl, sh * f}, ""});
    perts.push_back({Perturbation::Player::Sigma, {-kInf, kInf}, ""});

    McConfig cfg;
    cfg.paths = 20000;
    cfg.dt = 1e-3;
    cfg.seed = 42;
    auto rep = saddle_check(gbm(), payoff, x0, sol, perts, cfg);
    std::size_t passed = 0;
    double worst = 0.0;
    for (const auto& e : rep.entries) {
        // tau deviations may only lose, sigma deviations may only gain.
        double bad = e.pert.player == Perturbation::Player::Tau ? e.diff : -e.diff;
        double z = e.se_diff > 0.0 ? bad / e.se_diff : (bad > 0.0 ? kInf : -kInf);
        worst = std::max(worst, z);
        if (bad <= 3.0 * e.se_diff) ++passed;
    }
    return {passed == 10 && rep.entries.size() == 10,
            std::to_string(passed) + "/10 inequalities within 3 SE (worst z " + fmt("%.2f", worst) + "), V^ = " +
                fmt("%.4f", rep.base.mean) + " vs " + fmt("%.4f", sol.V(x0))};
}

Outcome criterion7(const std::vector<TransformedObstacle>& suite) {
    auto sol = solve_stopping(gbm(), put(), opts());
    double xs = sol.thresholds.at(0).b_star;
    const auto& xg = sol.tob.st->x_grid();
    auto it = std::upper_bound(xg.begin(), xg.end(), xs);
    double h = *it - *(it - 1);
    double slope = (sol.V(xs + h) - sol.V(xs)) / h;
    bool ok = std::fabs(slope + 1.0) <= 10.0 * h;

    std::size_t points = 0, contained = 0;
    for (const auto& tob : suite) {
        auto te = taut_string(tob);
        for (const auto& e : grid_smooth_fit(tob, te)) {
            ++points;
            if (e.contained) ++contained;
        }
    }
    ok = ok && points > 0 && contained == points;
    return {ok, "V'(x*+) = " + fmt("%.5f", slope) + " (h = " + fmt("%.4f", h) + "), containment " +
                    std::to_string(contained) + "/" + std::to_string(points) + " boundary points"};
}

Outcome criterion8() {
    // Brownian motion with psi = e^-x and phi = e^x, so the scale variable is
    // y = e^(2x) and G / psi = g(y). Both payoffs tend to 1 at the left end.
    auto solve_for = [](const std::string& g_of_y) {
        std::string G = "exp(-x) * (" + g_of_y + ")";
        std::string text = "diffusion.kind = bm\ndiffusion.rate = 1\ndiffusion.sigma = 1.4142135623730951\n"
                           "diffusion.x_min = -10\ndiffusion.x_max = 10\ngrid.n = 4097\n"
                           "payoff.G = " + G + "\npayoff.H = " + G + " + 5 * exp(x) * exp(-exp(2 * x))\n";
        auto cfg = parse_config(text, "criterion8");
        return solve_game(cfg.diffusion, cfg.payoff, cfg.solve);
    };
    // g dips below 1 first: the sup-player waits near the boundary.
    auto gap = solve_for("(1 + 3 * exp(4 * x)) * exp(-exp(2 * x))");
    // g is concave at the boundary: contact all the way down.
    auto touch = solve_for("(1 + 2 * exp(2 * x)) * exp(-exp(2 * x))");
    bool ok = gap.equilibrium == Equilibrium::NoNash && touch.equilibrium == Equilibrium::NashSaddle &&
              !touch.D_plus.empty() && touch.D_plus.front().lo == -kInf;
    return {ok, "dipping payoff: " + to_string(gap.equilibrium) + ", concave payoff: " + to_string(touch.equilibrium)};
}

}  // namespace

int main() {
    auto suite = corridor_suite();
    std::vector<std::pair<int, std::function<Outcome()>>> checks{
        {1, criterion1},
        {2, criterion2},
        {3, [&] { return criterion3(suite); }},
        {4, criterion4},
        {5, criterion5},
        {6, criterion6},
        {7, [&] { return criterion7(suite); }},
        {8, criterion8},
    };
    int failed = 0;
    for (auto& [id, run] : checks) {
        Outcome o;
        auto t0 = Clock::now();
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("criterion %d: %s  %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}

#include "stopgame/error.hpp"
#include "stopgame/solver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace stopgame;

namespace {

const double K = 100.0, r = 0.05, sigma = 0.3;
const double gam = 2.0 * r / (sigma * sigma);  // psi(x) = x^-gam
const double x_star = K / (1.0 + 1.0 / gam);
const double delta_star = K / gam / std::pow(1.0 + 1.0 / gam, 1.0 + gam);

DiffusionSpec gbm() {
    DiffusionSpec s;
    s.kind = GeometricBM{r, sigma};
    s.rate_r = r;
    s.a = 0.0;
    return with_default_truncation(s, K);
}

SolveOptions opts(std::size_t n = 4097) {
    SolveOptions o;
    o.n = n;
    o.spacing = Spacing::LogX;
    return o;
}

PayoffSpec put() { return make_payoff("max(K - x, 0)", std::nullopt, {{"K", K}}); }

PayoffSpec cancellable(double delta) {
    return make_payoff("max(K - x, 0)", std::string("max(K - x, 0) + delta"), {{"K", K}, {"delta", delta}});
}

double put_value(double x) { return x <= x_star ? K - x : (K - x_star) * std::pow(x_star / x, gam); }

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error");
    return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("perpetual put") {
    auto sol = solve_stopping(gbm(), put(), opts());
    REQUIRE(sol.thresholds.size() == 1);
    CHECK(sol.thresholds[0].b_star == doctest::Approx(x_star).epsilon(1e-6));
    CHECK(sol.V(x_star) == doctest::Approx(K - x_star).epsilon(1e-6));
    for (double x : {30.0, 60.0, 100.0, 150.0, 300.0})
        CHECK(std::fabs(sol.V(x) - put_value(x)) <= 1e-4 * put_value(x));
    CHECK(sol.dual_route_discrepancy <= 1e-6);
    REQUIRE(sol.D.size() == 1);
    CHECK(sol.D[0].contains(40.0));
    CHECK_FALSE(sol.D[0].contains(60.0));

    // V >= G everywhere, and V = G on the stopping set.
    for (double x = 1.0; x < 900.0; x *= 1.1) {
        double g = std::max(K - x, 0.0);
        CHECK(sol.V(x) >= g - 1e-9);
        if (sol.D[0].contains(x)) CHECK(sol.V(x) == doctest::Approx(g));
    }

    // Classical smooth fit at the exercise boundary.
    bool found = false;
    for (const auto& e : sol.smooth_fit) {
        if (std::fabs(e.x - x_star) < 1e-3) {
            found = true;
            CHECK(e.contained);
            CHECK(e.obstacle == 'G');
        }
    }
    CHECK(found);
}

TEST_CASE("put value is below every scale-concave majorant tried") {
    auto sol = solve_stopping(gbm(), put(), opts(1025));
    // h = p + c F with F = x^(1+gam); tangent lines to the scaled put payoff
    // are the natural candidates, and all of them must dominate V / psi.
    for (int k = 0; k < 20; ++k) {
        double t = 5.0 + 4.5 * k;  // tangency point
        double F = std::pow(t, 1.0 + gam), dF = (1.0 + gam) * std::pow(t, gam);
        double w = (K - t) * std::pow(t, gam), dw = -std::pow(t, gam) + gam * (K - t) * std::pow(t, gam - 1.0);
        double c = dw / dF, p = w - c * F;
        if (c < 0.0) continue;  // would cross below zero on the right
        for (double x = 1.0; x < 900.0; x *= 1.25) {
            double h = p + c * std::pow(x, 1.0 + gam);
            double v = sol.V(x) * std::pow(x, gam);
            CHECK(h >= v - 1e-9 * std::max(1.0, v));
        }
    }
}

TEST_CASE("payoff concave in scale is stopped at once") {
    // G / psi = min(F, 1000) is concave in the psi scale.
    auto p = make_payoff("min(x, 1000 * x^(-10/9))", std::nullopt, {});
    auto sol = solve_stopping(gbm(), p, opts(1025));
    REQUIRE(sol.D.size() == 1);
    CHECK(sol.C.empty());
    for (double x : {0.5, 20.0, 400.0}) CHECK(sol.V(x) == doctest::Approx(p.G.eval(x)).epsilon(1e-9));
}

TEST_CASE("no finite value") {
    auto p = make_payoff("x^(-10/9)", std::nullopt, {});
    CHECK(code_of([&] { solve_stopping(gbm(), p, opts(513)); }) == ErrorCode::NoFiniteValue);
    // A forced positive boundary limit has the same effect.
    auto o = opts(513);
    o.l_a = 1.0;
    CHECK(code_of([&] { solve_stopping(gbm(), put(), o); }) == ErrorCode::NoFiniteValue);
}

TEST_CASE("absorbed problems") {
    auto spec = gbm();
    // alpha == beta: absorbed at once.
    auto at = solve_stopping_absorbed(spec, put(), 70.0, 70.0, opts(257));
    CHECK(at.V(70.0) == 30.0);

    // An interior right absorption point can only lower the value.
    auto free = solve_stopping(spec, put(), opts(2049));
    auto cut = solve_stopping_absorbed(spec, put(), 0.01, 120.0, opts(2049));
    for (double x : {20.0, 50.0, 80.0, 110.0}) CHECK(cut.V(x) <= free.V(x) + 1e-9);
    CHECK(cut.V(30.0) == doctest::Approx(free.V(30.0)));
    CHECK(cut.V(120.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(code_of([&] { solve_stopping_absorbed(spec, put(), 80.0, 70.0); }) == ErrorCode::OrderingViolated);
}

TEST_CASE("Brownian motion absorbed at 0 and 1 with a spike payoff") {
    // Driftless BM with sigma = 1, r = 0.5: hitting b from x before 0 is
    // worth sinh(x) / sinh(b).
    DiffusionSpec s;
    s.kind = BrownianMotion{0.0, 1.0};
    s.rate_r = 0.5;
    s.a = -5.0;
    s.b = 5.0;
    s = with_default_truncation(s, 1.0);
    auto p = make_payoff("pos(1 - 20 * abs(x - 0.5))", std::nullopt, {});
    auto o = opts(4001);
    o.spacing = Spacing::UniformX;
    auto sol = solve_stopping_absorbed(s, p, 0.0, 1.0, o);

    auto oracle = [&](double x) {
        // Best single threshold on the side of the spike x sits on.
        double best = p.G.eval(x);
        for (int i = 0; i <= 20000; ++i) {
            double b = 0.45 + 0.1 * i / 20000.0;
            double w = b >= x ? std::sinh(x) / std::sinh(b) : std::sinh(1.0 - x) / std::sinh(1.0 - b);
            best = std::max(best, p.G.eval(b) * w);
        }
        return best;
    };
    for (double x : {0.1, 0.25, 0.4, 0.5, 0.6, 0.9})
        CHECK(sol.V(x) == doctest::Approx(oracle(x)).epsilon(1e-6));
    CHECK(sol.V(0.0) == 0.0);

    // With a tiny rate the value is the chord: V(0.25) = 0.5.
    s.rate_r = 1e-10;
    auto flat = solve_stopping_absorbed(s, p, 0.0, 1.0, o);
    CHECK(flat.V(0.25) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("cancellable put") {
    auto sol = solve_game(gbm(), cancellable(0.5 * delta_star), opts());
    CHECK(sol.equilibrium == Equilibrium::NashSaddle);
    REQUIRE(sol.D_plus.size() == 1);
    REQUIRE(sol.D_minus.size() == 1);
    CHECK(sol.D_minus[0].contains(K));
    CHECK_FALSE(sol.D_minus[0].contains(K + 1.0));
    double xs = sol.D_plus[0].hi;
    double u = xs / K, beta = 1.0 + gam;
    CHECK(std::fabs(beta * (1.0 + 0.5 * delta_star / K) * u - (beta - 1.0) - std::pow(u, beta)) <= 1e-8);

    auto [tl, th] = sol.tau_thresholds(80.0);
    CHECK(tl == doctest::Approx(xs));
    CHECK(th == kInf);
    auto [sl, sh] = sol.sigma_thresholds(80.0);
    CHECK(sl == -kInf);
    CHECK(sh == doctest::Approx(K));

    // G <= V <= H.
    for (double x = 1.0; x < 900.0; x *= 1.1) {
        double g = std::max(K - x, 0.0);
        CHECK(sol.V(x) >= g - 1e-9);
        CHECK(sol.V(x) <= g + 0.5 * delta_star + 1e-9);
    }
}

TEST_CASE("cancellation premium above the critical value") {
    auto game = solve_game(gbm(), cancellable(2.0 * delta_star), opts());
    CHECK(game.equilibrium == Equilibrium::Degenerate);
    CHECK(game.D_minus.empty());
    for (double x : {40.0, 70.0, 100.0, 200.0}) CHECK(game.V(x) == doctest::Approx(put_value(x)).epsilon(1e-6));
}

TEST_CASE("game values are ordered and monotone in the premium") {
    auto single = solve_stopping(gbm(), put(), opts(2049));
    double prev_v = -1.0;
    for (double f : {0.1, 0.3, 0.6, 0.9, 1.0, 1.5}) {
        auto g = solve_game(gbm(), cancellable(f * delta_star), opts(2049));
        double v = g.V(90.0);
        CHECK(v >= prev_v - 1e-9);
        CHECK(v <= single.V(90.0) + 1e-9);
        CHECK(v >= 10.0 - 1e-9);
        prev_v = v;
        if (f >= 1.0) CHECK(v == doctest::Approx(single.V(90.0)).epsilon(1e-6));
    }
}

TEST_CASE("equal payoffs") {
    auto p = make_payoff("max(K - x, 0)", std::string("max(K - x, 0)"), {{"K", K}});
    auto sol = solve_game(gbm(), p, opts(513));
    REQUIRE(sol.D_plus.size() == 1);
    REQUIRE(sol.D_minus.size() == 1);
    // Regions reaching the truncated ends extend to the state bounds.
    CHECK(sol.D_plus[0].lo == 0.0);
    CHECK(sol.D_plus[0].hi == kInf);
    CHECK(sol.D_minus[0].hi == kInf);
    for (double x : {5.0, 80.0, 300.0}) CHECK(sol.V(x) == doctest::Approx(std::max(K - x, 0.0)));
    auto [tl, th] = sol.tau_thresholds(80.0);
    CHECK(tl == 80.0);
    CHECK(th == 80.0);
}

TEST_CASE("misordered payoffs are rejected") {
    auto p = make_payoff("max(K - x, 0)", std::string("max(K - x, 0) - 1"), {{"K", K}});
    CHECK(code_of([&] { solve_game(gbm(), p, opts(257)); }) == ErrorCode::ObstacleOrderViolation);
    CHECK(code_of([&] { solve_stopping(gbm(), cancellable(1.0), opts(257)); }) ==
          ErrorCode::UnsupportedParameters);
}

TEST_CASE("grid smooth fit on raw corridors") {
    auto tob = make_corridor({0, 1, 2, 3, 4}, {0, 0, 1, 0, 0}, std::vector<double>{0, 2, 2, 2, 0});
    auto te = taut_string(tob);
    auto sf = grid_smooth_fit(tob, te);
    REQUIRE_FALSE(sf.empty());
    for (const auto& e : sf) CHECK(e.contained);
}

TEST_CASE("positive boundary limit: Nash holds only with contact at the boundary") {
    // BM with psi = e^-x, phi = e^x: scale variable y = e^(2x), and G / psi
    // is g(y). Both g tend to 1 as y -> 0.
    DiffusionSpec s;
    s.kind = BrownianMotion{0.0, std::sqrt(2.0)};
    s.rate_r = 1.0;
    s.lo = -10.0;
    s.hi = 10.0;
    auto o = opts(1025);
    o.spacing = Spacing::UniformX;
    auto game = [&](const std::string& g) {
        std::string G = "exp(-x) * (" + g + ")";
        return solve_game(s, make_payoff(G, G + " + 5 * exp(x) * exp(-exp(2 * x))", {}), o);
    };
    auto dip = game("(1 + 3 * exp(4 * x)) * exp(-exp(2 * x))");
    CHECK(dip.equilibrium == Equilibrium::NoNash);
    CHECK_FALSE(dip.assumptions.l_a_zero);
    auto touch = game("(1 + 2 * exp(2 * x)) * exp(-exp(2 * x))");
    CHECK(touch.equilibrium == Equilibrium::NashSaddle);
    REQUIRE_FALSE(touch.D_plus.empty());
    CHECK(touch.D_plus.front().lo == -kInf);
    // Forcing a zero limit restores the usual classification.
    o.l_a = 0.0;
    CHECK(game("(1 + 3 * exp(4 * x)) * exp(-exp(2 * x))").equilibrium != Equilibrium::NoNash);
}

#include "stopgame/barrier.hpp"
#include "stopgame/error.hpp"
#include "stopgame/transform.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace stopgame;

namespace {

const double K = 100.0, r = 0.05, sigma = 0.3;
const double alpha = 1.0 / (1.0 + 2.0 * r / (sigma * sigma));

DiffusionSpec gbm() {
    DiffusionSpec s;
    s.kind = GeometricBM{r, sigma};
    s.rate_r = r;
    s.a = 0.0;
    return with_default_truncation(s, K);
}

std::shared_ptr<const ScaleTransform> scale(ScaleDirection dir, std::size_t n = 513, double c = 1.0) {
    auto spec = gbm();
    auto f = fundamental_solutions(spec);
    if (c != 1.0) f = f.scaled(c);
    return std::make_shared<const ScaleTransform>(build_scale(spec, f, n, Spacing::LogX, dir));
}

PayoffSpec put(std::optional<double> delta = std::nullopt) {
    std::map<std::string, double> c{{"K", K}};
    std::optional<std::string> h;
    if (delta) {
        c["delta"] = *delta;
        h = "max(K - x, 0) + delta";
    }
    return make_payoff("max(K - x, 0)", h, c);
}

}  // namespace

TEST_CASE("put obstacles in the phi scale") {
    const double delta = 7.0;
    auto st = scale(ScaleDirection::UsePhiScale);
    auto tob = transform_payoff(st, put(delta));
    REQUIRE(tob.wh);
    for (std::size_t i = 0; i < tob.size(); ++i) {
        // The decreasing scale variable of the closed form is -y.
        double u = -tob.y[i];
        double base = std::max(K * std::pow(u, alpha) - 1.0, 0.0);
        CHECK(tob.wg[i] == doctest::Approx(base).epsilon(1e-12).scale(1.0));
        CHECK((*tob.wh)[i] == doctest::Approx(base + delta * std::pow(u, alpha)).epsilon(1e-12).scale(1.0));
    }
    // Pinned at the right origin, slope end on the left.
    CHECK(tob.right.kind == EndCondition::Kind::Pinned);
    CHECK(tob.right.y == 0.0);
    CHECK(tob.left.kind == EndCondition::Kind::Slope);
}

TEST_CASE("zero payoff has zero limits") {
    auto tob = transform_payoff(scale(ScaleDirection::UsePsiScale), make_payoff("0", std::nullopt, {}));
    for (double w : tob.wg) CHECK(w == 0.0);
    CHECK(tob.l_a.value == 0.0);
    CHECK(tob.l_b.value == 0.0);
    auto rep = check_assumptions(tob);
    CHECK(rep.l_a_zero);
    CHECK(rep.l_b_zero);
}

TEST_CASE("payoff equal to psi has l_a = 1") {
    auto tob = transform_payoff(scale(ScaleDirection::UsePsiScale), make_payoff("x^(-10/9)", std::nullopt, {}));
    for (double w : tob.wg) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tob.l_a.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(check_assumptions(tob).l_a_zero);

    TransformOptions strict;
    strict.require_zero_limits = true;
    try {
        transform_payoff(scale(ScaleDirection::UsePsiScale), make_payoff("x^(-10/9)", std::nullopt, {}), strict);
        FAIL("expected GrowthViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GrowthViolation);
    }
}

TEST_CASE("put and cancellable put satisfy the assumptions") {
    for (auto dir : {ScaleDirection::UsePsiScale, ScaleDirection::UsePhiScale}) {
        auto rep = check_assumptions(transform_payoff(scale(dir), put(11.6)));
        CHECK(rep.g_le_h);
        CHECK(rep.stuck_together);
        CHECK(rep.l_a_zero);
        CHECK(rep.l_b_zero);
    }
}

TEST_CASE("a constant gap is measured at both ends") {
    auto p = make_payoff("max(K - x, 0)", std::string("max(K - x, 0) + 1"), {{"K", K}});
    auto tob = transform_payoff(scale(ScaleDirection::UsePsiScale), p);
    // Gap over psi at the left end and over phi at the right end.
    CHECK(tob.gap_a.tail == doctest::Approx(std::pow(0.01, 10.0 / 9.0)).epsilon(1e-9));
    CHECK(tob.gap_b.tail == doctest::Approx(1e-3).epsilon(1e-9));
    // Both ratios tend to zero, and the truncated tails are within tolerance.
    auto rep = check_assumptions(tob);
    CHECK(rep.stuck_together);

    // A gap growing faster than phi does not close at the right end.
    auto q = make_payoff("max(K - x, 0)", std::string("max(K - x, 0) + x^2"), {{"K", K}});
    auto rq = check_assumptions(transform_payoff(scale(ScaleDirection::UsePsiScale), q));
    CHECK(rq.stuck_a);
    CHECK_FALSE(rq.stuck_b);
    CHECK_FALSE(rq.stuck_together);
}

TEST_CASE("order violations are measured") {
    auto p = make_payoff("max(K - x, 0)", std::string("max(K - x, 0) - 1"), {{"K", K}});
    auto rep = check_assumptions(transform_payoff(scale(ScaleDirection::UsePsiScale), p));
    CHECK_FALSE(rep.g_le_h);
    CHECK(rep.worst_order_violation > 0.0);
}

TEST_CASE("joint rescaling of phi and psi leaves the value unchanged") {
    for (auto dir : {ScaleDirection::UsePsiScale, ScaleDirection::UsePhiScale}) {
        auto st1 = scale(dir, 257, 1.0);
        auto st2 = scale(dir, 257, 37.5);
        auto t1 = transform_payoff(st1, put());
        auto t2 = transform_payoff(st2, put());
        auto v1 = taut_string(t1), v2 = taut_string(t2);
        for (std::size_t i = 0; i < t1.size(); ++i) {
            double x = st1->x_grid()[i];
            double a = v1.values[i] * st1->den(x), b = v2.values[i] * st2->den(x);
            CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
        }
    }
}

TEST_CASE("a scale-concave payoff is its own envelope") {
    // G = 2 psi + phi is affine in the psi scale.
    auto tob = transform_payoff(scale(ScaleDirection::UsePsiScale), make_payoff("2 * x^(-10/9) + x", std::nullopt, {}));
    auto te = taut_string(tob);
    for (std::size_t i = 0; i < tob.size(); ++i) {
        CHECK(te.values[i] == doctest::Approx(tob.wg[i]).epsilon(1e-12));
        CHECK(te.contact_lower[i]);
    }
}

TEST_CASE("raw corridors") {
    auto c = make_corridor({0, 1, 2}, {0, 0, 0}, std::vector<double>{0, 1, 0});
    CHECK(c.left.kind == EndCondition::Kind::Pinned);
    CHECK(c.right.value == 0.0);
    CHECK_THROWS_AS(make_corridor({0, 1, 2}, {0, 0, 0}, std::vector<double>{1, 1, 0}), Error);
    CHECK_THROWS_AS(make_corridor({0, 0, 2}, {0, 0, 0}, std::nullopt), Error);
}

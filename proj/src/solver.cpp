#include "stopgame/solver.hpp"

#include "stopgame/error.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stopgame {

std::string to_string(Equilibrium e) {
    switch (e) {
        case Equilibrium::NashSaddle: return "NashSaddle";
        case Equilibrium::StackelbergOnly: return "StackelbergOnly";
        case Equilibrium::NoNash: return "NoNash";
        case Equilibrium::Degenerate: return "Degenerate";
    }
    return "?";
}

ValueFunction::ValueFunction(std::shared_ptr<const ScaleTransform> st, PayoffSpec payoff, std::vector<Piece> pieces)
    : st_(std::move(st)), payoff_(std::move(payoff)), pieces_(std::move(pieces)) {}

const ValueFunction::Piece& ValueFunction::piece_at(double x) const {
    for (const auto& p : pieces_)
        if (x <= p.x_hi) return p;
    return pieces_.back();
}

double ValueFunction::operator()(double x) const {
    const Piece& p = piece_at(x);
    switch (p.kind) {
        case Kind::Lower: return payoff_.G.eval(x);
        case Kind::Upper: return payoff_.H->eval(x);
        case Kind::Line: break;
    }
    return (p.p + p.c * st_->scale(x)) * st_->den(x);
}

double ValueFunction::scaled(double x) const { return (*this)(x) / st_->den(x); }

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

// Obstacle w = f / den in natural scale and its x-derivative.
struct Side {
    const ScaleTransform* st;
    const PayoffExpr* f;
    double w(double x) const { return f->eval(x) / st->den(x); }
    double dw(double x) const {
        Dual g = f->eval_dual(x);
        double d = st->den(x), dd = st->dden(x);
        return (g.d * d - g.v * dd) / (d * d);
    }
};

// Point of [xa, xb] where sign (w - c s) is largest.
double tangent_point(const Side& side, double sign, double c, double xa, double xb) {
    auto h = [&](double x) { return sign * (side.w(x) - c * side.st->scale(x)); };
    auto dh = [&](double x) { return sign * (side.dw(x) - c * side.st->dscale(x)); };
    double da = dh(xa), db = dh(xb);
    if (da <= 0.0 && db <= 0.0) return xa;
    if (da >= 0.0 && db >= 0.0) return xb;
    if (da < 0.0 && db > 0.0) return h(xa) >= h(xb) ? xa : xb;
    double lo = xa, hi = xb;
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(lo), std::fabs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (dh(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    return h(lo) >= h(hi) ? lo : hi;
}

struct EndSpec {
    enum class T { TanG, TanH, Fixed, FixedSlope };
    T t = T::Fixed;
    double xa = 0.0, xb = 0.0;  // tangent search window
    double y = 0.0, v = 0.0;    // fixed point
    double x_at = 0.0;          // state position of a fixed point or slope end
    double s = 0.0;             // fixed slope
};

struct Polisher {
    const ScaleTransform* st;
    Side g, h;

    // Intercept at s = 0 of the line of slope c through the end, and where it touches.
    double intercept(const EndSpec& e, double c, double* x_touch) const {
        switch (e.t) {
            case EndSpec::T::TanG: {
                double x = tangent_point(g, 1.0, c, e.xa, e.xb);
                if (x_touch) *x_touch = x;
                return g.w(x) - c * st->scale(x);
            }
            case EndSpec::T::TanH: {
                double x = tangent_point(h, -1.0, c, e.xa, e.xb);
                if (x_touch) *x_touch = x;
                return h.w(x) - c * st->scale(x);
            }
            case EndSpec::T::Fixed:
            case EndSpec::T::FixedSlope:
                if (x_touch) *x_touch = e.x_at;
                return e.v - c * e.y;
        }
        return 0.0;
    }
};

enum Label : int { kFree = 0, kLower = 1, kUpper = 2, kBoth = 3 };

struct Run {
    int label;
    std::size_t i1, i2;
};

struct BuildInput {
    std::shared_ptr<const ScaleTransform> st;
    PayoffSpec payoff;
    const TransformedObstacle* tob;
    const TautEnvelope* te;
    double a_bound, b_bound;  // state-space ends of the leftmost and rightmost pieces
    bool polish;
};

ValueFunction build_value(const BuildInput& in) {
    const auto& tob = *in.tob;
    const auto& te = *in.te;
    const auto& xs = in.st->x_grid();
    const std::size_t n = tob.size();

    std::vector<Run> runs;
    for (std::size_t i = 0; i < n; ++i) {
        int lab = (te.contact_lower[i] ? kLower : 0) | (te.contact_upper[i] ? kUpper : 0);
        if (!runs.empty() && runs.back().label == lab) runs.back().i2 = i;
        else runs.push_back({lab, i, i});
    }

    Polisher pol{in.st.get(), Side{in.st.get(), &in.payoff.G},
                 Side{in.st.get(), in.payoff.H ? &*in.payoff.H : &in.payoff.G}};

    auto window = [&](std::size_t i) {
        std::size_t a = i >= 2 ? i - 2 : 0, b = std::min(n - 1, i + 2);
        return std::pair<double, double>{xs[a], xs[b]};
    };
    auto contact_end = [&](const Run& r, std::size_t i) {
        EndSpec e;
        if (r.label == kBoth) {
            e.t = EndSpec::T::Fixed;
            e.y = tob.y[i];
            e.v = te.values[i];
            e.x_at = xs[i];
        } else {
            e.t = r.label == kLower ? EndSpec::T::TanG : EndSpec::T::TanH;
            std::tie(e.xa, e.xb) = window(i);
        }
        return e;
    };
    auto boundary_end = [&](const EndCondition& c, bool left) {
        EndSpec e;
        std::size_t gi = left ? 0 : n - 1;
        if (c.kind == EndCondition::Kind::Slope) {
            e.t = EndSpec::T::FixedSlope;
            e.s = c.slope;
            e.y = tob.y[gi];
            e.v = te.values[gi];
            e.x_at = left ? in.a_bound : in.b_bound;
        } else {
            e.t = EndSpec::T::Fixed;
            e.y = c.y;
            e.v = c.value;
            bool on_grid = c.y == tob.y[gi];
            e.x_at = on_grid ? xs[gi] : (left ? in.a_bound : in.b_bound);
            if (on_grid) e.v = te.values[gi];
        }
        return e;
    };

    std::vector<ValueFunction::Piece> pieces;
    double cursor = in.a_bound;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const Run& run = runs[r];
        if (run.label != kFree) {
            ValueFunction::Piece p{cursor, in.b_bound,
                                   run.label == kUpper ? ValueFunction::Kind::Upper : ValueFunction::Kind::Lower};
            p.both = run.label == kBoth;
            pieces.push_back(p);
            continue;
        }
        // Free run: find the affine piece through its two ends.
        EndSpec L = r > 0 ? contact_end(runs[r - 1], runs[r - 1].i2) : boundary_end(tob.left, true);
        EndSpec R = r + 1 < runs.size() ? contact_end(runs[r + 1], runs[r + 1].i1) : boundary_end(tob.right, false);

        // Grid line, used as a starting point and as the fallback.
        std::size_t il = r > 0 ? runs[r - 1].i2 : run.i1;
        std::size_t ir = r + 1 < runs.size() ? runs[r + 1].i1 : run.i2;
        double c0;
        if (L.t == EndSpec::T::FixedSlope) c0 = L.s;
        else if (R.t == EndSpec::T::FixedSlope) c0 = R.s;
        else if (il != ir) c0 = (te.values[ir] - te.values[il]) / (tob.y[ir] - tob.y[il]);
        else c0 = 0.0;
        double p0 = te.values[il] - c0 * tob.y[il];
        double xl = r > 0 ? xs[il] : L.x_at, xr = r + 1 < runs.size() ? xs[ir] : R.x_at;
        double c = c0, p = p0;

        if (in.polish) {
            try {
                double xl_new = xl, xr_new = xr;
                if (L.t == EndSpec::T::FixedSlope || R.t == EndSpec::T::FixedSlope) {
                    c = L.t == EndSpec::T::FixedSlope ? L.s : R.s;
                    const EndSpec& other = L.t == EndSpec::T::FixedSlope ? R : L;
                    double xt;
                    p = pol.intercept(other, c, &xt);
                    if (L.t == EndSpec::T::FixedSlope) xr_new = xt;
                    else xl_new = xt;
                } else if (L.t == EndSpec::T::Fixed && R.t == EndSpec::T::Fixed) {
                    c = (R.v - L.v) / (R.y - L.y);
                    p = L.v - c * L.y;
                } else {
                    auto f = [&](double cc) { return pol.intercept(L, cc, nullptr) - pol.intercept(R, cc, nullptr); };
                    double scale_c = std::max(std::fabs(c0), 1e-300);
                    double d = 1e-6 * scale_c;
                    double lo = c0 - d, hi = c0 + d;
                    double flo = f(lo), fhi = f(hi);
                    int k = 0;
                    while ((flo > 0.0 || fhi < 0.0) && k++ < 200) {
                        d *= 4.0;
                        if (flo > 0.0) {
                            lo = c0 - d;
                            flo = f(lo);
                        }
                        if (fhi < 0.0) {
                            hi = c0 + d;
                            fhi = f(hi);
                        }
                    }
                    if (flo > 0.0 || fhi < 0.0) throw Error(ErrorCode::NoConvergence, "no bracket for tangent slope");
                    if (flo == 0.0) c = lo;
                    else if (fhi == 0.0) c = hi;
                    else {
                        boost::uintmax_t iters = 200;
                        auto res = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                                     boost::math::tools::eps_tolerance<double>(52), iters);
                        c = 0.5 * (res.first + res.second);
                    }
                    p = pol.intercept(L, c, &xl_new);
                    pol.intercept(R, c, &xr_new);
                }
                if (std::isfinite(c) && std::isfinite(p)) {
                    xl = xl_new;
                    xr = xr_new;
                } else {
                    c = c0;
                    p = p0;
                }
            } catch (const Error&) {
                c = c0;
                p = p0;
            }
        }
        if (!pieces.empty()) {
            xl = std::max(xl, pieces.back().x_lo);
            pieces.back().x_hi = xl;
        }
        ValueFunction::Piece lp{xl, xr, ValueFunction::Kind::Line, p, c};
        pieces.push_back(lp);
        cursor = xr;
    }
    pieces.back().x_hi = in.b_bound;
    for (std::size_t k = 1; k < pieces.size(); ++k) pieces[k].x_lo = std::min(pieces[k].x_lo, pieces[k].x_hi);
    return ValueFunction(in.st, in.payoff, std::move(pieces));
}

std::vector<Interval> collect(const ValueFunction& V, bool upper) {
    std::vector<Interval> out;
    for (const auto& p : V.pieces()) {
        bool in = p.kind == (upper ? ValueFunction::Kind::Upper : ValueFunction::Kind::Lower) ||
                  (p.both && p.kind != ValueFunction::Kind::Line);
        if (!in) continue;
        if (!out.empty() && out.back().hi >= p.x_lo) out.back().hi = std::max(out.back().hi, p.x_hi);
        else out.push_back({p.x_lo, p.x_hi});
    }
    return out;
}

std::vector<Interval> collect_lines(const ValueFunction& V) {
    std::vector<Interval> out;
    for (const auto& p : V.pieces())
        if (p.kind == ValueFunction::Kind::Line) out.push_back({p.x_lo, p.x_hi});
    return out;
}

// State-space ends that the scale origin and slope ends correspond to.
std::pair<double, double> state_bounds(const DiffusionSpec& spec) {
    double a = spec.left.kind == Boundary::Kind::Absorbing ? spec.left.at : spec.a;
    double b = spec.right.kind == Boundary::Kind::Absorbing ? spec.right.at : spec.b;
    return {a, b};
}

struct Prepared {
    std::shared_ptr<const ScaleTransform> st;
    TransformedObstacle tob;
};

Prepared prepare(const DiffusionSpec& spec, const PayoffSpec& payoff, const SolveOptions& opts, bool require_zero) {
    spec.validate();
    auto fund = fundamental_solutions(spec);
    auto st = std::make_shared<const ScaleTransform>(build_scale(spec, fund, opts.n, opts.spacing, opts.direction));
    TransformOptions to;
    to.l_a = opts.l_a;
    to.l_b = opts.l_b;
    to.w0 = opts.w0;
    to.require_zero_limits = require_zero;
    Prepared p{st, {}};
    try {
        p.tob = transform_payoff(st, payoff, to);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::GrowthViolation) throw Error(ErrorCode::NoFiniteValue, e.what());
        throw;
    }
    return p;
}

StoppingSolution finish_stopping(const DiffusionSpec& spec, const PayoffSpec& payoff, Prepared prep,
                                 double a_bound, double b_bound, bool polish) {
    StoppingSolution sol;
    sol.te = taut_string(prep.tob);
    sol.tob = std::move(prep.tob);
    (void)spec;
    sol.V = build_value({prep.st, payoff, &sol.tob, &sol.te, a_bound, b_bound, polish});
    sol.D = collect(sol.V, false);
    sol.C = collect_lines(sol.V);
    for (const auto& d : sol.D) sol.thresholds.push_back({d.lo, d.hi});
    sol.smooth_fit = smooth_fit_report(sol.V, *prep.st, payoff);
    return sol;
}

}  // namespace

StoppingSolution solve_stopping(const DiffusionSpec& spec, const PayoffSpec& payoff, const SolveOptions& opts) {
    if (payoff.H) throw Error(ErrorCode::UnsupportedParameters, "stopping problem takes no upper payoff H");
    auto [a, b] = state_bounds(spec);
    Prepared prep = prepare(spec, payoff, opts, true);
    auto st = prep.st;
    StoppingSolution sol = finish_stopping(spec, payoff, std::move(prep), a, b, opts.polish);

    if (opts.cross_check) {
        SolveOptions other = opts;
        other.cross_check = false;
        other.direction = opts.direction == ScaleDirection::UsePsiScale ? ScaleDirection::UsePhiScale
                                                                        : ScaleDirection::UsePsiScale;
        other.w0.reset();
        try {
            Prepared p2 = prepare(spec, payoff, other, true);
            StoppingSolution s2 = finish_stopping(spec, payoff, std::move(p2), a, b, opts.polish);
            const auto& xs = st->x_grid();
            const std::size_t skip = std::max<std::size_t>(1, xs.size() / 100);
            double worst = 0.0;
            for (std::size_t i = skip; i + skip < xs.size(); ++i) {
                double v1 = sol.V(xs[i]), v2 = s2.V(xs[i]);
                double d = std::fabs(v1 - v2) / std::max(std::fabs(v1), 1e-300);
                worst = std::max(worst, d);
            }
            sol.dual_route_discrepancy = worst;
        } catch (const Error&) {
            sol.dual_route_discrepancy = kInf;
        }
    }
    return sol;
}

StoppingSolution solve_stopping_absorbed(const DiffusionSpec& spec, const PayoffSpec& payoff, double alpha,
                                         double beta, const SolveOptions& opts) {
    if (payoff.H) throw Error(ErrorCode::UnsupportedParameters, "stopping problem takes no upper payoff H");
    if (!(alpha <= beta) || !(alpha > spec.a) || !(beta < spec.b))
        throw Error(ErrorCode::OrderingViolated,
                    "need a < alpha <= beta < b, got alpha=" + num(alpha) + ", beta=" + num(beta));
    spec.validate();
    auto fund = fundamental_solutions(spec);

    if (alpha == beta) {
        StoppingSolution sol;
        auto st = std::make_shared<const ScaleTransform>(fund, std::vector<double>{alpha}, opts.direction);
        ValueFunction::Piece p{alpha, alpha, ValueFunction::Kind::Lower};
        sol.V = ValueFunction(st, payoff, {p});
        sol.D = {{alpha, alpha}};
        sol.thresholds = {{alpha, alpha}};
        return sol;
    }

    auto st = std::make_shared<const ScaleTransform>(
        build_scale(fund, alpha, beta, std::max<std::size_t>(opts.n, 2), opts.spacing, opts.direction));
    TransformedObstacle tob;
    tob.st = st;
    tob.payoff = payoff;
    tob.y = st->y_grid();
    const auto& xs = st->x_grid();
    tob.wg.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) tob.wg[i] = payoff.G.eval(xs[i]) / st->den(xs[i]);
    // Absorption: the majorant is anchored at the payoff values at both ends.
    tob.left = EndCondition::pinned(tob.y.front(), tob.wg.front());
    tob.right = EndCondition::pinned(tob.y.back(), tob.wg.back());
    Prepared prep{st, std::move(tob)};
    return finish_stopping(spec, payoff, std::move(prep), alpha, beta, opts.polish);
}

GameSolution solve_game(const DiffusionSpec& spec, const PayoffSpec& payoff, const SolveOptions& opts) {
    if (!payoff.H) throw Error(ErrorCode::UnsupportedParameters, "game needs an upper payoff H");
    auto [a, b] = state_bounds(spec);
    Prepared prep = prepare(spec, payoff, opts, false);

    GameSolution sol;
    sol.assumptions = check_assumptions(prep.tob);
    double gscale = 0.0;
    for (double w : prep.tob.wg) gscale = std::max(gscale, std::fabs(w));
    if (sol.assumptions.worst_order_violation > 1e-9 * gscale)
        throw Error(ErrorCode::ObstacleOrderViolation,
                    "G exceeds H by " + num(sol.assumptions.worst_order_violation) + " in natural scale");

    sol.te = taut_string(prep.tob);
    sol.tob = std::move(prep.tob);
    sol.V = build_value({prep.st, payoff, &sol.tob, &sol.te, a, b, opts.polish});
    sol.D_plus = collect(sol.V, false);
    sol.D_minus = collect(sol.V, true);
    sol.smooth_fit = smooth_fit_report(sol.V, *prep.st, payoff);

    const auto& te = sol.te;
    const auto& tob = sol.tob;
    const std::size_t n = tob.size();
    bool any_upper = std::any_of(te.contact_upper.begin(), te.contact_upper.end(), [](bool c) { return c; });
    bool identical = true;
    for (std::size_t i = 0; i < n; ++i) identical = identical && tob.upper(i) - tob.wg[i] <= te.tol;

    const auto& rep = sol.assumptions;
    bool la_zero = opts.l_a ? *opts.l_a <= 0.0 : rep.l_a_zero;
    bool lb_zero = opts.l_b ? *opts.l_b <= 0.0 : rep.l_b_zero;
    if (!any_upper && !identical) {
        sol.equilibrium = Equilibrium::Degenerate;
    } else if (la_zero && lb_zero) {
        sol.equilibrium = rep.stuck_together ? Equilibrium::NashSaddle : Equilibrium::StackelbergOnly;
    } else {
        // A positive limit at a boundary: Nash fails when the sup-player does
        // not stop all the way up to that boundary.
        const std::size_t k = std::min<std::size_t>(3, n);
        bool gap = false;
        for (std::size_t j = 0; j < k; ++j) {
            if (!la_zero && !te.contact_lower[j]) gap = true;
            if (!lb_zero && !te.contact_lower[n - 1 - j]) gap = true;
        }
        sol.equilibrium = gap ? Equilibrium::NoNash : Equilibrium::NashSaddle;
    }
    return sol;
}

namespace {

std::pair<double, double> nearest(const std::vector<Interval>& set, double x) {
    double lo = -kInf, hi = kInf;
    for (const auto& iv : set) {
        if (iv.contains(x)) return {x, x};
        if (iv.hi < x) lo = std::max(lo, iv.hi);
        if (iv.lo > x) hi = std::min(hi, iv.lo);
    }
    return {lo, hi};
}

}  // namespace

std::pair<double, double> GameSolution::tau_thresholds(double x) const { return nearest(D_plus, x); }
std::pair<double, double> GameSolution::sigma_thresholds(double x) const { return nearest(D_minus, x); }

std::vector<SmoothFitEntry> smooth_fit_report(const ValueFunction& V, const ScaleTransform& st,
                                              const PayoffSpec& payoff) {
    std::vector<SmoothFitEntry> out;
    const auto& ps = V.pieces();
    auto one_sided = [&](const PayoffExpr& f, double x, double dir) {
        double h = 1e-7 * std::max(1.0, std::fabs(x));
        double xe = x + dir * h;
        Side s{&st, &f};
        return s.dw(xe) / st.dscale(xe);
    };
    for (std::size_t k = 0; k < ps.size(); ++k) {
        const auto& line = ps[k];
        if (line.kind != ValueFunction::Kind::Line) continue;
        for (int side = 0; side < 2; ++side) {
            std::size_t nb = side == 0 ? k - 1 : k + 1;
            if ((side == 0 && k == 0) || nb >= ps.size()) continue;
            const auto& other = ps[nb];
            if (other.kind == ValueFunction::Kind::Line) continue;
            SmoothFitEntry e;
            e.x = side == 0 ? line.x_lo : line.x_hi;
            if (!std::isfinite(e.x)) continue;
            e.obstacle = other.kind == ValueFunction::Kind::Upper ? 'H' : 'G';
            e.continuation_right = side == 0;
            e.slope = line.c;
            const PayoffExpr& f = e.obstacle == 'H' ? *payoff.H : payoff.G;
            e.d_plus = one_sided(f, e.x, +1.0);
            e.d_minus = one_sided(f, e.x, -1.0);
            double lo = std::min(e.d_plus, e.d_minus), hi = std::max(e.d_plus, e.d_minus);
            double tol = 1e-5 * (std::fabs(e.d_plus) + std::fabs(e.d_minus) + std::fabs(e.slope)) + 1e-12;
            e.mismatch = e.slope < lo ? lo - e.slope : (e.slope > hi ? e.slope - hi : 0.0);
            e.contained = e.mismatch <= tol;
            out.push_back(e);
        }
    }
    return out;
}

std::vector<SmoothFitEntry> grid_smooth_fit(const TransformedObstacle& tob, const TautEnvelope& te) {
    std::vector<SmoothFitEntry> out;
    const std::size_t n = tob.size();
    auto free_at = [&](std::size_t i) { return !te.contact_lower[i] && !te.contact_upper[i]; };
    for (std::size_t i = 0; i < n; ++i) {
        if (free_at(i)) continue;
        for (int side = 0; side < 2; ++side) {
            if ((side == 0 && i == 0) || (side == 1 && i + 1 >= n)) continue;
            std::size_t j = side == 0 ? i - 1 : i + 1;
            if (!free_at(j)) continue;
            for (int ob = 0; ob < 2; ++ob) {
                bool lower = ob == 0;
                if (lower ? !te.contact_lower[i] : !te.contact_upper[i]) continue;
                const auto w = [&](std::size_t k) { return lower ? tob.wg[k] : tob.upper(k); };
                SmoothFitEntry e;
                e.x = tob.y[i];
                e.obstacle = lower ? 'G' : 'H';
                e.continuation_right = side == 1;
                e.slope = (te.values[j] - te.values[i]) / (tob.y[j] - tob.y[i]);
                e.d_plus = i + 1 < n ? (w(i + 1) - w(i)) / (tob.y[i + 1] - tob.y[i]) : e.slope;
                e.d_minus = i > 0 ? (w(i) - w(i - 1)) / (tob.y[i] - tob.y[i - 1]) : e.slope;
                double lo = std::min(e.d_plus, e.d_minus), hi = std::max(e.d_plus, e.d_minus);
                double tol = 1e-7 * (std::fabs(e.d_plus) + std::fabs(e.d_minus) + std::fabs(e.slope)) + 1e-12;
                e.mismatch = e.slope < lo ? lo - e.slope : (e.slope > hi ? e.slope - hi : 0.0);
                e.contained = e.mismatch <= tol;
                out.push_back(e);
            }
        }
    }
    return out;
}

}  // namespace stopgame

#include "stopgame/transform.hpp"

#include "stopgame/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stopgame {

namespace {

constexpr std::size_t kTail = 10;

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

// pos[i] -> 0 at the boundary; vals sampled at the tail, outermost first.
BoundaryLimit estimate_limit(const std::vector<double>& pos, const std::vector<double>& vals, double tol,
                             bool nonneg) {
    BoundaryLimit out;
    out.tol = tol;
    out.tail = vals[0];
    double l = vals[0];
    if (vals.size() >= 2 && pos[1] != pos[0]) l = vals[0] - pos[0] * (vals[1] - vals[0]) / (pos[1] - pos[0]);
    // On log-like grids the outermost sample can sit many steps from the
    // boundary, so the linear extrapolation is kept; it is only bounded by the
    // size of the tail data.
    double span = 0.0;
    for (double v : vals) span = std::max(span, std::fabs(v));
    l = std::clamp(l, vals[0] - span, vals[0] + span);
    if (nonneg) l = std::max(l, 0.0);
    out.value = l;
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < vals.size(); ++i) {
        inc = inc && vals[i] >= vals[i - 1];
        dec = dec && vals[i] <= vals[i - 1];
    }
    out.monotone = inc || dec;
    return out;
}

double pos_part(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

TransformedObstacle transform_payoff(std::shared_ptr<const ScaleTransform> st, const PayoffSpec& payoff,
                                     const TransformOptions& opts) {
    const auto& xs = st->x_grid();
    const auto& fund = st->fund();
    const std::size_t n = xs.size();
    const bool psi_dir = st->direction() == ScaleDirection::UsePsiScale;

    TransformedObstacle tob;
    tob.y = st->y_grid();
    tob.st = st;
    tob.payoff = payoff;

    std::vector<double> g(n), h;
    for (std::size_t i = 0; i < n; ++i) g[i] = payoff.G.eval(xs[i]);
    if (payoff.H) {
        h.resize(n);
        for (std::size_t i = 0; i < n; ++i) h[i] = payoff.H->eval(xs[i]);
    }

    tob.wg.resize(n);
    for (std::size_t i = 0; i < n; ++i) tob.wg[i] = g[i] / st->den(xs[i]);
    if (payoff.H) {
        std::vector<double> wh(n);
        for (std::size_t i = 0; i < n; ++i) wh[i] = h[i] / st->den(xs[i]);
        tob.wh = std::move(wh);
    }

    // Boundary limits in the normalization where that end is the scale origin.
    const std::size_t k = std::min(kTail, n);
    double max_ga = 0.0, max_gb = 0.0;
    double max_ha = -kInf, min_ga = kInf, max_hb = -kInf, min_gb = kInf;
    for (std::size_t i = 0; i < n; ++i) {
        double p = fund.psi(xs[i]), f = fund.phi(xs[i]);
        max_ga = std::max(max_ga, pos_part(g[i]) / p);
        max_gb = std::max(max_gb, pos_part(g[i]) / f);
        min_ga = std::min(min_ga, g[i] / p);
        min_gb = std::min(min_gb, g[i] / f);
        if (payoff.H) {
            max_ha = std::max(max_ha, h[i] / p);
            max_hb = std::max(max_hb, h[i] / f);
        }
    }
    std::vector<double> pa(k), pb(k), va(k), vb(k), da(k), db(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t ia = j, ib = n - 1 - j;
        double psa = fund.psi(xs[ia]), pha = fund.phi(xs[ia]);
        double psb = fund.psi(xs[ib]), phb = fund.phi(xs[ib]);
        pa[j] = pha / psa;
        pb[j] = -psb / phb;
        va[j] = pos_part(g[ia]) / psa;
        vb[j] = pos_part(g[ib]) / phb;
        if (payoff.H) {
            da[j] = (h[ia] - g[ia]) / psa;
            db[j] = (h[ib] - g[ib]) / phb;
        }
    }
    tob.l_a = estimate_limit(pa, va, 1e-3 * max_ga, true);
    tob.l_b = estimate_limit(pb, vb, 1e-3 * max_gb, true);
    if (payoff.H) {
        tob.gap_a = estimate_limit(pa, da, 1e-3 * (max_ha - min_ga), false);
        tob.gap_b = estimate_limit(pb, db, 1e-3 * (max_hb - min_gb), false);
    }

    auto effective = [](const BoundaryLimit& l, const std::optional<double>& over) {
        if (over) return *over;
        return l.value <= l.tol ? 0.0 : l.value;
    };
    double la = effective(tob.l_a, opts.l_a);
    double lb = effective(tob.l_b, opts.l_b);
    if (opts.l_a) tob.l_a.value = *opts.l_a;
    if (opts.l_b) tob.l_b.value = *opts.l_b;

    // An explicit override states the limit, so any positive value counts.
    bool a_pos = opts.l_a ? la > 0.0 : la > tob.l_a.tol;
    bool b_pos = opts.l_b ? lb > 0.0 : lb > tob.l_b.tol;
    if (opts.require_zero_limits && (a_pos || b_pos)) {
        throw Error(ErrorCode::GrowthViolation,
                    "boundary limits l_a=" + num(la) + ", l_b=" + num(lb) +
                        " are not zero; no finite optimal stopping time exists");
    }

    if (psi_dir) {
        tob.w0 = opts.w0 ? *opts.w0 : la;
        tob.left = EndCondition::pinned(0.0, tob.w0);
        tob.right = EndCondition::with_slope(lb);
    } else {
        tob.w0 = opts.w0 ? *opts.w0 : lb;
        tob.left = EndCondition::with_slope(-la);
        tob.right = EndCondition::pinned(0.0, tob.w0);
    }
    return tob;
}

TransformedObstacle make_corridor(std::vector<double> y, std::vector<double> wg,
                                  std::optional<std::vector<double>> wh) {
    const std::size_t n = y.size();
    if (n < 2 || wg.size() != n || (wh && wh->size() != n))
        throw Error(ErrorCode::OutOfRange, "corridor arrays must have equal length >= 2");
    for (std::size_t i = 1; i < n; ++i)
        if (!(y[i] > y[i - 1])) throw Error(ErrorCode::OutOfRange, "corridor grid must be strictly increasing");

    TransformedObstacle tob;
    double lo_end = wg.front(), hi_end = wg.back();
    if (wh) {
        double top = *std::max_element(wh->begin(), wh->end());
        double bottom = *std::min_element(wg.begin(), wg.end());
        double tol = 1e-3 * (top - bottom);
        double ga = wh->front() - wg.front(), gb = wh->back() - wg.back();
        if (ga > tol || gb > tol)
            throw Error(ErrorCode::EndsNotAnchored,
                        "end gaps " + num(ga) + ", " + num(gb) + " exceed tolerance " + num(tol));
        lo_end = 0.5 * (wg.front() + wh->front());
        hi_end = 0.5 * (wg.back() + wh->back());
    }
    tob.left = EndCondition::pinned(y.front(), lo_end);
    tob.right = EndCondition::pinned(y.back(), hi_end);
    tob.y = std::move(y);
    tob.wg = std::move(wg);
    tob.wh = std::move(wh);
    return tob;
}

AssumptionReport check_assumptions(const TransformedObstacle& tob) {
    AssumptionReport rep;
    rep.l_a = tob.l_a;
    rep.l_b = tob.l_b;
    rep.gap_a = tob.gap_a;
    rep.gap_b = tob.gap_b;
    rep.l_a_zero = tob.l_a.value <= tob.l_a.tol;
    rep.l_b_zero = tob.l_b.value <= tob.l_b.tol;
    if (tob.wh) {
        double worst = -kInf;
        for (std::size_t i = 0; i < tob.size(); ++i) worst = std::max(worst, tob.wg[i] - (*tob.wh)[i]);
        rep.worst_order_violation = worst;
        double scale = 0.0;
        for (std::size_t i = 0; i < tob.size(); ++i)
            scale = std::max({scale, std::fabs(tob.wg[i]), std::fabs((*tob.wh)[i])});
        rep.g_le_h = worst <= 1e-12 * scale;
        rep.stuck_a = std::fabs(tob.gap_a.value) <= tob.gap_a.tol;
        rep.stuck_b = std::fabs(tob.gap_b.value) <= tob.gap_b.tol;
        rep.stuck_together = rep.stuck_a && rep.stuck_b;
    }
    return rep;
}

}  // namespace stopgame

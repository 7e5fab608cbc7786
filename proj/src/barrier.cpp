#include "stopgame/barrier.hpp"

#include "stopgame/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stopgame {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

bool same_position(double a, double b) { return std::fabs(a - b) <= 1e-14 * (std::fabs(a) + std::fabs(b)); }

// Grid with pinned virtual end points included.
struct Ext {
    std::vector<double> t, lo, hi;
    std::size_t offset = 0;  // index of the first real grid point
    std::size_t n = 0;       // number of real grid points
};

Ext extend(const TransformedObstacle& tob, bool require_pinned) {
    const std::size_t n = tob.size();
    Ext e;
    e.n = n;
    auto hi_at = [&](std::size_t i) { return tob.upper(i); };
    auto check_pin = [&](const EndCondition& c, std::size_t i) {
        double tol = 1e-9 * (std::fabs(tob.wg[i]) + (std::isfinite(hi_at(i)) ? std::fabs(hi_at(i)) : 0.0) + 1e-300);
        if (c.value < tob.wg[i] - tol || c.value > hi_at(i) + tol)
            throw Error(ErrorCode::EndsNotAnchored,
                        "pinned end value " + num(c.value) + " outside the corridor at the grid end");
    };
    for (const EndCondition* c : {&tob.left, &tob.right})
        if (require_pinned && c->kind != EndCondition::Kind::Pinned)
            throw Error(ErrorCode::EndsNotAnchored, "operation needs both ends pinned");

    if (tob.left.kind == EndCondition::Kind::Pinned && !same_position(tob.left.y, tob.y.front())) {
        e.t.push_back(tob.left.y);
        e.lo.push_back(tob.left.value);
        e.hi.push_back(tob.left.value);
        e.offset = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        e.t.push_back(tob.y[i]);
        e.lo.push_back(tob.wg[i]);
        e.hi.push_back(hi_at(i));
    }
    if (tob.left.kind == EndCondition::Kind::Pinned && same_position(tob.left.y, tob.y.front())) {
        check_pin(tob.left, 0);
        e.lo[e.offset] = e.hi[e.offset] = tob.left.value;
    }
    if (tob.right.kind == EndCondition::Kind::Pinned) {
        if (same_position(tob.right.y, tob.y.back())) {
            check_pin(tob.right, n - 1);
            e.lo.back() = e.hi.back() = tob.right.value;
        } else {
            e.t.push_back(tob.right.y);
            e.lo.push_back(tob.right.value);
            e.hi.push_back(tob.right.value);
        }
    }
    return e;
}

struct P {
    double t, v;
};

double slope(const P& a, const P& b) { return (b.v - a.v) / (b.t - a.t); }

// Deque-like chain with O(1) front pops.
struct Chain {
    std::vector<P> v;
    std::size_t head = 0;
    std::size_t size() const { return v.size() - head; }
    const P& at(std::size_t k) const { return v[head + k]; }
    const P& back() const { return v.back(); }
    void pop_back() { v.pop_back(); }
    void pop_front() { ++head; }
    void push_back(const P& p) { v.push_back(p); }
    void reset(const P& a, const P& b) {
        v.clear();
        head = 0;
        v.push_back(a);
        v.push_back(b);
    }
};

// Funnel algorithm on the trapezoid sleeve between lo and hi. The first point
// is pinned (lo == hi). The last is pinned too unless horizontal_end, in which
// case the string leaves the last portal horizontally.
std::vector<double> funnel(const std::vector<double>& t, const std::vector<double>& lo,
                           const std::vector<double>& hi, bool horizontal_end) {
    const std::size_t m = t.size();
    std::vector<P> path;
    P apex{t[0], lo[0]};
    path.push_back(apex);
    Chain U, L;
    U.push_back(apex);
    L.push_back(apex);

    auto add_upper = [&](const P& p) {
        while (U.size() >= 2 && slope(U.at(U.size() - 2), U.back()) >= slope(U.at(U.size() - 2), p)) U.pop_back();
        if (U.size() == 1) {
            while (L.size() >= 2 && slope(apex, p) < slope(apex, L.at(1))) {
                apex = L.at(1);
                path.push_back(apex);
                L.pop_front();
            }
            U.reset(apex, p);
        } else {
            U.push_back(p);
        }
    };
    auto add_lower = [&](const P& q) {
        while (L.size() >= 2 && slope(L.at(L.size() - 2), L.back()) <= slope(L.at(L.size() - 2), q)) L.pop_back();
        if (L.size() == 1) {
            while (U.size() >= 2 && slope(apex, q) > slope(apex, U.at(1))) {
                apex = U.at(1);
                path.push_back(apex);
                U.pop_front();
            }
            L.reset(apex, q);
        } else {
            L.push_back(q);
        }
    };

    for (std::size_t k = 1; k < m; ++k) {
        add_upper({t[k], hi[k]});
        add_lower({t[k], lo[k]});
    }

    if (horizontal_end) {
        if (L.size() >= 2 && slope(apex, L.at(1)) > 0.0) {
            while (L.size() >= 2 && slope(apex, L.at(1)) > 0.0) {
                apex = L.at(1);
                path.push_back(apex);
                L.pop_front();
            }
        } else if (U.size() >= 2 && slope(apex, U.at(1)) < 0.0) {
            while (U.size() >= 2 && slope(apex, U.at(1)) < 0.0) {
                apex = U.at(1);
                path.push_back(apex);
                U.pop_front();
            }
        }
        if (apex.t < t.back()) path.push_back({t.back(), apex.v});
    } else {
        const Chain& rest = U.size() > 2 ? U : L;
        for (std::size_t k = 1; k < rest.size(); ++k) path.push_back(rest.at(k));
    }

    std::vector<double> out(m);
    std::size_t s = 0;
    for (std::size_t i = 0; i < m; ++i) {
        while (s + 1 < path.size() && path[s + 1].t <= t[i]) ++s;
        if (path[s].t == t[i] || s + 1 >= path.size()) out[i] = path[s].v;
        else {
            const P& a = path[s];
            const P& b = path[s + 1];
            out[i] = a.v + (b.v - a.v) * ((t[i] - a.t) / (b.t - a.t));
        }
    }
    return out;
}

double envelope_tol(const TransformedObstacle& tob, const std::vector<double>& values) {
    double scale = 1e-300;
    double gmin = kInf, gmax = -kInf;
    for (std::size_t i = 0; i < tob.size(); ++i) {
        scale = std::max({scale, std::fabs(tob.wg[i]), std::fabs(values[i])});
        gmin = std::min(gmin, tob.wg[i]);
        gmax = std::max(gmax, tob.wg[i]);
    }
    return 1e-9 * std::max(scale, gmax - gmin);
}

// Level at which the running max of the sheared lower obstacle meets the
// running min of the sheared upper obstacle, scanning from k in direction dir.
double crossing_level(const Ext& e, std::size_t k, double c, int dir) {
    const double tk = e.t[k];
    auto g = [&](std::size_t j) { return e.lo[j] - c * (e.t[j] - tk); };
    auto h = [&](std::size_t j) { return e.hi[j] - c * (e.t[j] - tk); };
    double M = g(k), mH = h(k);
    if (M >= mH) return M;
    const std::ptrdiff_t last = dir < 0 ? -1 : static_cast<std::ptrdiff_t>(e.t.size());
    for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(k) + dir; j != last; j += dir) {
        std::size_t a = static_cast<std::size_t>(j - dir), b = static_cast<std::size_t>(j);
        double ga = g(a), gb = g(b), ha = h(a), hb = h(b);
        double s = 2.0;
        if (gb >= mH) s = std::min(s, (mH - ga) / (gb - ga));
        if (hb <= M) s = std::min(s, (ha - M) / (ha - hb));
        if (gb >= hb) s = std::min(s, (ga - ha) / ((ga - ha) - (gb - hb)));
        if (s <= 1.0) {
            s = std::clamp(s, 0.0, 1.0);
            return std::max(M, ga + s * (gb - ga));
        }
        M = std::max(M, gb);
        mH = std::min(mH, hb);
    }
    return kInf;
}

struct ExitPair {
    double L, R;
    std::size_t jl, jr;  // last vertex inside on each side
};

// Exit positions of the line p + c (t - t_k) from the closed corridor.
LineProbe probe_ext(const Ext& e, std::size_t k, double c, double p, double tol) {
    LineProbe lp;
    const double tk = e.t[k];
    auto line = [&](std::size_t j) { return p + c * (e.t[j] - tk); };
    auto dG = [&](std::size_t j) { return line(j) - e.lo[j]; };
    auto dH = [&](std::size_t j) { return line(j) - e.hi[j]; };
    auto root = [&](std::size_t a, std::size_t b, double da, double db) {
        if (std::fabs(db) <= tol) return e.t[b];
        if (std::fabs(da) <= tol) return e.t[a];
        return e.t[a] + (e.t[b] - e.t[a]) * (da / (da - db));
    };
    auto intercept = [&](auto d, int dir) {
        if (std::fabs(d(k)) <= tol) return e.t[k];
        const std::ptrdiff_t last = dir < 0 ? -1 : static_cast<std::ptrdiff_t>(e.t.size());
        for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(k) + dir; j != last; j += dir) {
            std::size_t a = static_cast<std::size_t>(j - dir), b = static_cast<std::size_t>(j);
            double da = d(a), db = d(b);
            if (!std::isfinite(db)) continue;
            if (std::fabs(db) <= tol || (da > 0) != (db > 0)) return root(a, b, da, db);
        }
        return dir < 0 ? -kInf : kInf;
    };
    lp.l_G = intercept(dG, -1);
    lp.r_G = intercept(dG, +1);
    lp.l_H = intercept(dH, -1);
    lp.r_H = intercept(dH, +1);

    auto outside = [&](std::size_t j) { return dG(j) < -tol || dH(j) > tol; };
    if (outside(k)) {
        lp.L = lp.R = tk;
        return lp;
    }
    auto exit_at = [&](int dir) {
        const std::ptrdiff_t last = dir < 0 ? -1 : static_cast<std::ptrdiff_t>(e.t.size());
        for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(k) + dir; j != last; j += dir) {
            std::size_t a = static_cast<std::size_t>(j - dir), b = static_cast<std::size_t>(j);
            if (!outside(b)) continue;
            double pos = dir < 0 ? -kInf : kInf;
            if (dG(b) < -tol) {
                double r = root(a, b, std::max(dG(a), 0.0), dG(b));
                pos = dir < 0 ? std::max(pos, r) : std::min(pos, r);
            }
            if (dH(b) > tol) {
                double r = root(a, b, std::min(dH(a), 0.0), dH(b));
                pos = dir < 0 ? std::max(pos, r) : std::min(pos, r);
            }
            return pos;
        }
        return dir < 0 ? -kInf : kInf;
    };
    lp.L = exit_at(-1);
    lp.R = exit_at(+1);
    return lp;
}

double probe_tol(const Ext& e) {
    double s = 1e-300;
    for (std::size_t j = 0; j < e.t.size(); ++j) {
        s = std::max(s, std::fabs(e.lo[j]));
        if (std::isfinite(e.hi[j])) s = std::max(s, std::fabs(e.hi[j]));
    }
    return 1e-12 * s;
}

// Extremum of the sheared obstacle over [L, R]; vertices inside plus the
// interpolated end values.
double extremum_on(const Ext& e, const std::vector<double>& w, std::size_t k, double c, double L, double R,
                   bool want_max) {
    const double tk = e.t[k];
    auto val = [&](double t) {
        auto it = std::upper_bound(e.t.begin(), e.t.end(), t);
        std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(it - e.t.begin()), e.t.size() - 1);
        std::size_t a = b == 0 ? 0 : b - 1;
        double v = (a == b || e.t[b] == e.t[a]) ? w[a] : w[a] + (w[b] - w[a]) * ((t - e.t[a]) / (e.t[b] - e.t[a]));
        if (t >= e.t.back()) v = w.back();
        return v - c * (t - tk);
    };
    double lo_t = std::max(L, e.t.front()), hi_t = std::min(R, e.t.back());
    double best = want_max ? -kInf : kInf;
    auto take = [&](double v) { best = want_max ? std::max(best, v) : std::min(best, v); };
    take(val(lo_t));
    take(val(hi_t));
    for (std::size_t j = 0; j < e.t.size(); ++j)
        if (e.t[j] >= lo_t && e.t[j] <= hi_t) take(w[j] - c * (e.t[j] - tk));
    return best;
}

}  // namespace

TautEnvelope make_envelope(const TransformedObstacle& tob, std::vector<double> values) {
    TautEnvelope te;
    const std::size_t n = tob.size();
    te.values = std::move(values);
    te.tol = envelope_tol(tob, te.values);
    te.eps_star.resize(n);
    te.delta_star.resize(n);
    te.contact_lower.resize(n);
    te.contact_upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        te.eps_star[i] = te.values[i] - tob.wg[i];
        te.delta_star[i] = tob.upper(i) - te.values[i];
        te.contact_lower[i] = te.eps_star[i] <= te.tol;
        te.contact_upper[i] = te.delta_star[i] <= te.tol;
    }
    return te;
}

TautEnvelope taut_string(const TransformedObstacle& tob) {
    if (!tob.wh) {
        auto env = least_concave_majorant(tob.y, tob.wg, tob.left, tob.right);
        return make_envelope(tob, std::move(env.values));
    }
    const bool lslope = tob.left.kind == EndCondition::Kind::Slope;
    const bool rslope = tob.right.kind == EndCondition::Kind::Slope;
    if (lslope && rslope) throw Error(ErrorCode::UnsupportedParameters, "at most one end may carry a slope condition");

    TransformedObstacle work = tob;
    if (lslope) {
        work.left.kind = EndCondition::Kind::Pinned;  // placeholder, re-set after mirroring
    }
    Ext e;
    double s = 0.0;
    bool mirrored = false;
    if (lslope) {
        // Mirror t -> -t so the slope end is on the right.
        TransformedObstacle m;
        const std::size_t n = tob.size();
        m.y.resize(n);
        m.wg.resize(n);
        std::vector<double> wh(n);
        for (std::size_t i = 0; i < n; ++i) {
            m.y[i] = -tob.y[n - 1 - i];
            m.wg[i] = tob.wg[n - 1 - i];
            wh[i] = (*tob.wh)[n - 1 - i];
        }
        m.wh = std::move(wh);
        m.left = tob.right;
        m.left.y = -tob.right.y;
        m.right = EndCondition::with_slope(-tob.left.slope);
        e = extend(m, false);
        s = m.right.slope;
        mirrored = true;
    } else {
        e = extend(tob, false);
        if (rslope) s = tob.right.slope;
    }
    const bool horizontal = lslope || rslope;
    if (s != 0.0)
        for (std::size_t j = 0; j < e.t.size(); ++j) {
            e.lo[j] -= s * e.t[j];
            e.hi[j] -= s * e.t[j];
        }
    if (e.lo.front() != e.hi.front())
        throw Error(ErrorCode::EndsNotAnchored, "start of the corridor is not pinned");
    if (!horizontal && e.lo.back() != e.hi.back())
        throw Error(ErrorCode::EndsNotAnchored, "end of the corridor is not pinned");

    auto v = funnel(e.t, e.lo, e.hi, horizontal);
    if (s != 0.0)
        for (std::size_t j = 0; j < e.t.size(); ++j) v[j] += s * e.t[j];

    const std::size_t n = tob.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = e.offset + (mirrored ? n - 1 - i : i);
        out[i] = std::clamp(v[j], tob.wg[i], (*tob.wh)[i]);
    }
    return make_envelope(tob, std::move(out));
}

TautEnvelope double_obstacle_fixpoint(const TransformedObstacle& tob, double tol, std::size_t max_iter) {
    Ext e = extend(tob, true);
    const std::size_t m = e.t.size();
    std::vector<double> v(m);
    double scale = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        v[j] = std::isfinite(e.hi[j]) ? 0.5 * (e.lo[j] + e.hi[j]) : e.lo[j];
        scale = std::max(scale, std::fabs(v[j]));
    }
    const double pi = 3.14159265358979323846;
    const double omega = 2.0 / (1.0 + std::sin(pi / static_cast<double>(std::max<std::size_t>(m - 1, 2))));
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        double change = 0.0;
        for (std::size_t j = 1; j + 1 < m; ++j) {
            double wl = e.t[j + 1] - e.t[j], wr = e.t[j] - e.t[j - 1];
            double avg = (v[j - 1] * wl + v[j + 1] * wr) / (wl + wr);
            double nv = std::clamp(v[j] + omega * (avg - v[j]), e.lo[j], e.hi[j]);
            change = std::max(change, std::fabs(nv - v[j]));
            v[j] = nv;
        }
        if (change <= tol * scale) break;
    }
    if (it == max_iter) throw Error(ErrorCode::NoConvergence, "fixpoint did not converge in " + std::to_string(max_iter) + " sweeps");
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(e.offset),
                            v.begin() + static_cast<std::ptrdiff_t>(e.offset + e.n));
    auto te = make_envelope(tob, std::move(out));
    te.iterations = it + 1;
    return te;
}

std::vector<double> supinf_bruteforce(const TransformedObstacle& tob, SupInfSide side) {
    if (tob.size() > 257) throw Error(ErrorCode::GridTooLarge, "brute force limited to n <= 257, got " + std::to_string(tob.size()));
    if (!tob.wh) throw Error(ErrorCode::UnsupportedParameters, "brute force needs an upper obstacle");
    Ext e = extend(tob, true);
    const double tol = probe_tol(e);

    std::vector<double> pts_t, pts_v;
    for (std::size_t j = 0; j < e.t.size(); ++j) {
        pts_t.push_back(e.t[j]);
        pts_v.push_back(e.lo[j]);
        if (e.hi[j] != e.lo[j]) {
            pts_t.push_back(e.t[j]);
            pts_v.push_back(e.hi[j]);
        }
    }
    std::vector<double> slopes;
    for (std::size_t a = 0; a < pts_t.size(); ++a)
        for (std::size_t b = a + 1; b < pts_t.size(); ++b)
            if (pts_t[a] != pts_t[b]) slopes.push_back((pts_v[b] - pts_v[a]) / (pts_t[b] - pts_t[a]));
    std::sort(slopes.begin(), slopes.end());
    slopes.erase(std::unique(slopes.begin(), slopes.end()), slopes.end());

    std::vector<double> out(e.n);
    for (std::size_t i = 0; i < e.n; ++i) {
        const std::size_t k = i + e.offset;
        const bool maximize = side == SupInfSide::SupSup || side == SupInfSide::SupInf;
        double best = maximize ? -kInf : kInf;
        for (double c : slopes) {
            double pl = crossing_level(e, k, c, -1);
            double pr = crossing_level(e, k, c, +1);
            double val = 0.0;
            switch (side) {
                case SupInfSide::SupSup: val = std::min(pl, pr); break;
                case SupInfSide::InfInf: val = std::max(pl, pr); break;
                case SupInfSide::InfSup: {
                    double p = std::max(pl, pr);
                    auto lp = probe_ext(e, k, c, p, tol);
                    val = extremum_on(e, e.lo, k, c, lp.L, lp.R, true);
                    break;
                }
                case SupInfSide::SupInf: {
                    double p = std::min(pl, pr);
                    auto lp = probe_ext(e, k, c, p, tol);
                    val = extremum_on(e, e.hi, k, c, lp.L, lp.R, false);
                    break;
                }
            }
            best = maximize ? std::max(best, val) : std::min(best, val);
        }
        out[i] = best;
    }
    return out;
}

LineProbe line_probe(const TransformedObstacle& tob, std::size_t x_index, double c, double p) {
    Ext e = extend(tob, false);
    if (x_index >= e.n) throw Error(ErrorCode::OutOfRange, "x_index out of range");
    return probe_ext(e, x_index + e.offset, c, p, probe_tol(e));
}

std::pair<SlopeInterval, SlopeInterval> modified_differentials(const TautEnvelope&, const TransformedObstacle& tob,
                                                               std::size_t x_index) {
    Ext e = extend(tob, false);
    if (x_index >= e.n) throw Error(ErrorCode::OutOfRange, "x_index out of range");
    const std::size_t k = x_index + e.offset;
    const std::size_t m = e.t.size();
    const bool rslope = tob.right.kind == EndCondition::Kind::Slope;
    const bool lslope = tob.left.kind == EndCondition::Kind::Slope;

    // Superdifferential of wg relative to wh, pivot (t_k, lo_k).
    SlopeInterval sup_hg{-kInf, kInf};
    {
        const double g0 = e.lo[k];
        double run = kInf;
        for (std::size_t j = k + 1; j < m; ++j) {
            double dt = e.t[j] - e.t[k];
            double sg = (e.lo[j] - g0) / dt, sh = (e.hi[j] - g0) / dt;
            sup_hg.lo = std::max(sup_hg.lo, std::min(sg, run));
            run = std::min(run, sh);
        }
        if (rslope) sup_hg.lo = std::max(sup_hg.lo, std::min(tob.right.slope, run));
        run = -kInf;
        for (std::size_t j = k; j-- > 0;) {
            double dt = e.t[j] - e.t[k];
            double sg = (e.lo[j] - g0) / dt, sh = (e.hi[j] - g0) / dt;
            sup_hg.hi = std::min(sup_hg.hi, std::max(sg, run));
            run = std::max(run, sh);
        }
        if (lslope) sup_hg.hi = std::min(sup_hg.hi, std::max(tob.left.slope, run));
    }

    SlopeInterval sub_gh{kInf, -kInf};
    if (tob.wh) {
        sub_gh = {-kInf, kInf};
        const double h0 = e.hi[k];
        double run = -kInf;
        for (std::size_t j = k + 1; j < m; ++j) {
            double dt = e.t[j] - e.t[k];
            double sh = (e.hi[j] - h0) / dt, sg = (e.lo[j] - h0) / dt;
            sub_gh.hi = std::min(sub_gh.hi, std::max(sh, run));
            run = std::max(run, sg);
        }
        if (rslope) sub_gh.hi = std::min(sub_gh.hi, std::max(tob.right.slope, run));
        run = kInf;
        for (std::size_t j = k; j-- > 0;) {
            double dt = e.t[j] - e.t[k];
            double sh = (e.hi[j] - h0) / dt, sg = (e.lo[j] - h0) / dt;
            sub_gh.lo = std::max(sub_gh.lo, std::min(sh, run));
            run = std::min(run, sg);
        }
        if (lslope) sub_gh.lo = std::max(sub_gh.lo, std::min(tob.left.slope, run));
    }
    return {sub_gh, sup_hg};
}

}  // namespace stopgame

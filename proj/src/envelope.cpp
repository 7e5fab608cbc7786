#include "stopgame/envelope.hpp"

#include "stopgame/error.hpp"

#include <algorithm>
#include <cmath>

namespace stopgame {

namespace {

struct Pt {
    double y, v;
};

double chord_at(const Pt& a, const Pt& c, double y) { return a.v + (c.v - a.v) * ((y - a.y) / (c.y - a.y)); }

// Indices of the upper hull vertices. A point within tol of the chord of its
// neighbours is dropped, so re-hulling a hull reproduces the same vertices.
std::vector<std::size_t> upper_hull(const std::vector<Pt>& p, double tol) {
    std::vector<std::size_t> h;
    for (std::size_t k = 0; k < p.size(); ++k) {
        while (h.size() >= 2) {
            const Pt& a = p[h[h.size() - 2]];
            const Pt& b = p[h.back()];
            if (b.v <= chord_at(a, p[k], b.y) + tol) h.pop_back();
            else break;
        }
        h.push_back(k);
    }
    return h;
}

bool same_position(double a, double b) { return std::fabs(a - b) <= 1e-14 * (std::fabs(a) + std::fabs(b)); }

}  // namespace

EnvelopeResult least_concave_majorant(const std::vector<double>& y, const std::vector<double>& f,
                                      const std::optional<EndCondition>& left,
                                      const std::optional<EndCondition>& right) {
    const std::size_t n = y.size();
    if (n == 0 || f.size() != n) throw Error(ErrorCode::OutOfRange, "envelope needs matching non-empty arrays");

    double fmin = *std::min_element(f.begin(), f.end());
    double fmax = *std::max_element(f.begin(), f.end());
    double scale = std::max({fmax - fmin, std::fabs(fmax), std::fabs(fmin), 1e-300});

    bool left_slope = left && left->kind == EndCondition::Kind::Slope;
    bool right_slope = right && right->kind == EndCondition::Kind::Slope;
    if (left_slope && right_slope)
        throw Error(ErrorCode::UnsupportedParameters, "at most one end may carry a slope condition");
    double shear = left_slope ? left->slope : right_slope ? right->slope : 0.0;

    // Points in sheared coordinates, with virtual anchors.
    std::vector<Pt> pts;
    pts.reserve(n + 2);
    std::size_t offset = 0;
    auto pinned_value = [&](const EndCondition& e, double fend) {
        if (e.value < fend - 1e-12 * scale)
            throw Error(ErrorCode::AnchorBelowF, "pinned end value lies below the obstacle");
        return std::max(e.value, fend);
    };
    std::vector<double> g(f);
    if (left && left->kind == EndCondition::Kind::Pinned) {
        if (same_position(left->y, y.front())) g.front() = pinned_value(*left, f.front());
        else if (left->y < y.front()) {
            pts.push_back({left->y, left->value - shear * left->y});
            offset = 1;
        } else throw Error(ErrorCode::OutOfRange, "left anchor lies inside the grid");
    }
    if (right && right->kind == EndCondition::Kind::Pinned && same_position(right->y, y.back()))
        g.back() = pinned_value(*right, f.back());
    for (std::size_t i = 0; i < n; ++i) pts.push_back({y[i], shear == 0.0 ? g[i] : g[i] - shear * y[i]});
    if (right && right->kind == EndCondition::Kind::Pinned && !same_position(right->y, y.back())) {
        if (right->y < y.back()) throw Error(ErrorCode::OutOfRange, "right anchor lies inside the grid");
        pts.push_back({right->y, right->value - shear * right->y});
    }

    // Slope ends become monotonicity constraints after shearing.
    if (right_slope)
        for (std::size_t k = 1; k < pts.size(); ++k) pts[k].v = std::max(pts[k].v, pts[k - 1].v);
    if (left_slope)
        for (std::size_t k = pts.size() - 1; k-- > 0;) pts[k].v = std::max(pts[k].v, pts[k + 1].v);

    auto hull = upper_hull(pts, 1e-14 * scale);

    EnvelopeResult res;
    res.values.resize(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = i + offset;
        while (seg + 1 < hull.size() && hull[seg + 1] < k) ++seg;
        double v;
        if (hull[seg] == k) v = pts[k].v;
        else if (seg + 1 < hull.size() && hull[seg + 1] == k) v = pts[k].v;
        else v = std::max(pts[k].v, chord_at(pts[hull[seg]], pts[hull[seg + 1]], pts[k].y));
        res.values[i] = shear == 0.0 ? v : v + shear * y[i];
    }

    res.tol_eq = 1e-9 * scale;
    res.eps_profile.resize(n);
    res.contact.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        res.eps_profile[i] = res.values[i] - f[i];
        res.contact[i] = res.eps_profile[i] <= res.tol_eq;
    }
    for (std::size_t i = 0; i < n;) {
        if (res.contact[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && !res.contact[j + 1]) ++j;
        res.segments.emplace_back(i, j);
        i = j + 1;
    }
    return res;
}

double concave_conjugate(const std::vector<double>& y, const std::vector<double>& f, double c) {
    double m = kInf;
    for (std::size_t i = 0; i < y.size(); ++i) m = std::min(m, c * y[i] - f[i]);
    return m;
}

std::vector<double> biconjugate_from_conjugate(const std::vector<double>& y, const std::vector<double>& f,
                                               const std::vector<double>& c_grid) {
    std::vector<double> conj(c_grid.size());
    for (std::size_t k = 0; k < c_grid.size(); ++k) conj[k] = concave_conjugate(y, f, c_grid[k]);
    std::vector<double> out(y.size(), kInf);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t k = 0; k < c_grid.size(); ++k) out[i] = std::min(out[i], c_grid[k] * y[i] - conj[k]);
    return out;
}

std::vector<double> secant_slopes(const std::vector<double>& y, const std::vector<double>& f) {
    std::vector<double> s;
    s.reserve(y.size() * (y.size() - 1) / 2);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = i + 1; j < y.size(); ++j) s.push_back((f[j] - f[i]) / (y[j] - y[i]));
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

SlopeInterval superdifferential_at(const std::vector<double>& y, const std::vector<double>& f, std::size_t i) {
    SlopeInterval s{-kInf, kInf};
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (j == i) continue;
        double c = (f[j] - f[i]) / (y[j] - y[i]);
        if (j > i) s.lo = std::max(s.lo, c);
        else s.hi = std::min(s.hi, c);
    }
    return s;
}

std::vector<double> tangent_envelope(const std::vector<double>& y, const std::vector<double>& f) {
    const auto slopes = secant_slopes(y, f);
    std::vector<double> out(y.size(), -kInf);
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (double c : slopes) {
            double left = -kInf, right = -kInf;
            for (std::size_t j = 0; j <= i; ++j) left = std::max(left, f[j] - c * (y[j] - y[i]));
            for (std::size_t j = i; j < y.size(); ++j) right = std::max(right, f[j] - c * (y[j] - y[i]));
            out[i] = std::max(out[i], std::min(left, right));
        }
        if (y.size() == 1) out[i] = f[i];
    }
    return out;
}

}  // namespace stopgame

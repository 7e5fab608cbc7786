#include "stopgame/diffusion.hpp"

#include "stopgame/error.hpp"

#include <cmath>
// Boost 1.74 pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <sstream>

namespace stopgame {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

struct BmImpl final : FundamentalSolutions::Impl {
    double up, down;  // exponents of phi and psi
    BmImpl(double u, double d) : up(u), down(d) {}
    double phi(double x) const override { return std::exp(up * x); }
    double psi(double x) const override { return std::exp(down * x); }
    double dphi(double x) const override { return up * std::exp(up * x); }
    double dpsi(double x) const override { return down * std::exp(down * x); }
};

struct GbmImpl final : FundamentalSolutions::Impl {
    double gamma;  // psi(x) = x^-gamma
    explicit GbmImpl(double g) : gamma(g) {}
    double phi(double x) const override { return x; }
    double psi(double x) const override { return std::pow(x, -gamma); }
    double dphi(double) const override { return 1.0; }
    double dpsi(double x) const override { return -gamma * std::pow(x, -gamma - 1.0); }
};

struct ScaledImpl final : FundamentalSolutions::Impl {
    std::shared_ptr<const FundamentalSolutions::Impl> base;
    double c;
    ScaledImpl(std::shared_ptr<const FundamentalSolutions::Impl> b, double s) : base(std::move(b)), c(s) {}
    double phi(double x) const override { return c * base->phi(x); }
    double psi(double x) const override { return c * base->psi(x); }
    double dphi(double x) const override { return c * base->dphi(x); }
    double dpsi(double x) const override { return c * base->dpsi(x); }
};

struct TabulatedImpl final : FundamentalSolutions::Impl {
    using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
    std::shared_ptr<Pchip> p_phi, p_psi;
    double lo, hi;
    TabulatedImpl(const CustomTabulated& t)
        : p_phi(std::make_shared<Pchip>(std::vector<double>(t.grid), std::vector<double>(t.phi_values))),
          p_psi(std::make_shared<Pchip>(std::vector<double>(t.grid), std::vector<double>(t.psi_values))),
          lo(t.grid.front()),
          hi(t.grid.back()) {}
    double clamp(double x) const {
        if (x < lo || x > hi) throw Error(ErrorCode::OutOfRange, "x=" + num(x) + " outside tabulation");
        return x;
    }
    double phi(double x) const override { return (*p_phi)(clamp(x)); }
    double psi(double x) const override { return (*p_psi)(clamp(x)); }
    double dphi(double x) const override { return p_phi->prime(clamp(x)); }
    double dpsi(double x) const override { return p_psi->prime(clamp(x)); }
};

// Solution of the second-order ODE stored at integrator nodes with value,
// first and second derivative; evaluated by cubic Hermite interpolation of
// (f, f') and (f', f'').
struct OdeTrack {
    std::vector<double> x, f, df, ddf;

    std::size_t cell(double t) const {
        if (t < x.front() || t > x.back()) throw Error(ErrorCode::OutOfRange, "x=" + num(t) + " outside ODE range");
        auto it = std::upper_bound(x.begin(), x.end(), t);
        std::size_t i = static_cast<std::size_t>(it - x.begin());
        return std::clamp<std::size_t>(i, 1, x.size() - 1) - 1;
    }
    static double hermite(double t, double x0, double x1, double v0, double v1, double d0, double d1) {
        double h = x1 - x0;
        double s = (t - x0) / h;
        double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * v0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * v1 +
               (s3 - s2) * h * d1;
    }
    double value(double t) const {
        std::size_t i = cell(t);
        return hermite(t, x[i], x[i + 1], f[i], f[i + 1], df[i], df[i + 1]);
    }
    double deriv(double t) const {
        std::size_t i = cell(t);
        return hermite(t, x[i], x[i + 1], df[i], df[i + 1], ddf[i], ddf[i + 1]);
    }
};

struct NumericImpl final : FundamentalSolutions::Impl {
    OdeTrack tphi, tpsi;
    double cphi = 1.0, cpsi = 1.0;
    double phi(double x) const override { return cphi * tphi.value(x); }
    double psi(double x) const override { return cpsi * tpsi.value(x); }
    double dphi(double x) const override { return cphi * tphi.deriv(x); }
    double dpsi(double x) const override { return cpsi * tpsi.deriv(x); }
};

OdeTrack integrate_branch(const std::function<double(double)>& mu, const std::function<double(double)>& D,
                          double r, double from, double to, double slope) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 2>;
    auto rhs = [&](const State& s, State& ds, double x) {
        double d = D(x);
        if (!(d > 0.0)) throw Error(ErrorCode::DegenerateSystem, "D(x) <= 0 at x=" + num(x));
        ds[0] = s[1];
        ds[1] = (r * s[0] - mu(x) * s[1]) / d;
    };
    OdeTrack tr;
    State s{0.0, slope};
    double span = to - from;
    // odeint compares the step cap with the sign of the step
    double max_dt = span / 4000.0;
    auto stepper = odeint::make_controlled(1e-13, 1e-11, max_dt, odeint::runge_kutta_dopri5<State>());
    auto observe = [&](const State& st, double x) {
        State ds;
        rhs(st, ds, x);
        // odeint may report the end point twice
        if (!tr.x.empty() && x == tr.x.back()) return;
        tr.x.push_back(x);
        tr.f.push_back(st[0]);
        tr.df.push_back(st[1]);
        tr.ddf.push_back(ds[1]);
    };
    try {
        odeint::integrate_adaptive(stepper, rhs, s, from, to, span / 20000.0, observe);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IntegrationFailure, e.what());
    }
    if (tr.x.size() < 2) throw Error(ErrorCode::IntegrationFailure, "no integration steps");
    if (span < 0) {
        std::reverse(tr.x.begin(), tr.x.end());
        std::reverse(tr.f.begin(), tr.f.end());
        std::reverse(tr.df.begin(), tr.df.end());
        std::reverse(tr.ddf.begin(), tr.ddf.end());
    }
    for (std::size_t i = 1; i < tr.x.size(); ++i) {
        if (!(tr.x[i] > tr.x[i - 1])) throw Error(ErrorCode::IntegrationFailure, "step-size underflow");
    }
    return tr;
}

std::vector<double> sample_points(double lo, double hi, int n) {
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * (i + 0.5) / n);
    return xs;
}

}  // namespace

double DiffusionSpec::sde_drift(double x) const {
    if (auto* bm = std::get_if<BrownianMotion>(&kind)) return bm->drift;
    if (auto* g = std::get_if<GeometricBM>(&kind)) return g->r_drift * x;
    if (auto* c = std::get_if<CustomCoefficients>(&kind)) return c->mu.eval(x);
    throw Error(ErrorCode::UnsupportedParameters, "tabulated diffusion has no SDE coefficients");
}

double DiffusionSpec::sde_vol(double x) const {
    if (auto* bm = std::get_if<BrownianMotion>(&kind)) return bm->sigma;
    if (auto* g = std::get_if<GeometricBM>(&kind)) return g->sigma * x;
    if (auto* c = std::get_if<CustomCoefficients>(&kind)) {
        double d = c->D.eval(x);
        if (d < 0.0) throw Error(ErrorCode::DegenerateSystem, "D(x) < 0 at x=" + num(x));
        return std::sqrt(2.0 * d);
    }
    throw Error(ErrorCode::UnsupportedParameters, "tabulated diffusion has no SDE coefficients");
}

bool DiffusionSpec::has_sde() const { return !std::holds_alternative<CustomTabulated>(kind); }

void DiffusionSpec::validate() const {
    if (!(rate_r > 0.0)) throw Error(ErrorCode::UnsupportedParameters, "rate_r must be > 0");
    if (!(a < b)) throw Error(ErrorCode::UnsupportedParameters, "interval requires a < b");
    if (auto* bm = std::get_if<BrownianMotion>(&kind); bm && !(bm->sigma > 0.0))
        throw Error(ErrorCode::UnsupportedParameters, "sigma must be > 0");
    if (auto* g = std::get_if<GeometricBM>(&kind)) {
        if (!(g->sigma > 0.0)) throw Error(ErrorCode::UnsupportedParameters, "sigma must be > 0");
        if (a < 0.0) throw Error(ErrorCode::UnsupportedParameters, "GBM lives on (0, inf)");
    }
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi) || lo <= a || hi >= b)
        throw Error(ErrorCode::UnsupportedParameters,
                    "truncated interval [" + num(lo) + ", " + num(hi) + "] must be finite and inside (a, b)");
    if (left.kind == Boundary::Kind::Absorbing && (left.at < lo || left.at > hi))
        throw Error(ErrorCode::UnsupportedParameters, "left absorbing point outside [lo, hi]");
    if (right.kind == Boundary::Kind::Absorbing && (right.at < lo || right.at > hi))
        throw Error(ErrorCode::UnsupportedParameters, "right absorbing point outside [lo, hi]");
}

DiffusionSpec with_default_truncation(DiffusionSpec spec, double ref_scale) {
    if (spec.lo < spec.hi) return spec;
    bool finite = std::isfinite(spec.a) && std::isfinite(spec.b);
    double width = finite ? spec.b - spec.a : 0.0;
    if (std::holds_alternative<GeometricBM>(spec.kind)) {
        spec.lo = std::isfinite(spec.a) && spec.a > 0.0 ? spec.a + 1e-4 * ref_scale : 1e-4 * ref_scale;
        spec.hi = std::isfinite(spec.b) ? spec.b - 1e-4 * ref_scale : 10.0 * ref_scale;
        return spec;
    }
    if (auto* c = std::get_if<CustomCoefficients>(&spec.kind)) {
        double w = c->ode_hi - c->ode_lo;
        spec.lo = c->ode_lo + 1e-3 * w;
        spec.hi = c->ode_hi - 1e-3 * w;
        return spec;
    }
    if (auto* t = std::get_if<CustomTabulated>(&spec.kind)) {
        if (!t->grid.empty()) {
            spec.lo = t->grid.front();
            spec.hi = t->grid.back();
        }
        return spec;
    }
    if (!finite)
        throw Error(ErrorCode::UnsupportedParameters,
                    "infinite interval end needs an explicit truncation (x_min / x_max)");
    spec.lo = spec.a + 1e-4 * width;
    spec.hi = spec.b - 1e-4 * width;
    return spec;
}

FundamentalSolutions::FundamentalSolutions(std::shared_ptr<const Impl> impl, FundamentalSource source,
                                           double lo, double hi)
    : impl_(std::move(impl)), source_(source), lo_(lo), hi_(hi) {}

FundamentalSolutions FundamentalSolutions::scaled(double c) const {
    FundamentalSolutions out(std::make_shared<ScaledImpl>(impl_, c), source_, lo_, hi_);
    std::vector<double> w = wronskian_;
    for (double& v : w) v *= c * c;
    out.wronskian_ = std::move(w);
    return out;
}

FundamentalSolutions fundamental_solutions(const DiffusionSpec& spec) {
    if (!(spec.rate_r > 0.0)) throw Error(ErrorCode::UnsupportedParameters, "rate_r must be > 0");
    const double r = spec.rate_r;

    if (auto* bm = std::get_if<BrownianMotion>(&spec.kind)) {
        if (!(bm->sigma > 0.0)) throw Error(ErrorCode::UnsupportedParameters, "sigma must be > 0");
        double s2 = bm->sigma * bm->sigma;
        double disc = std::sqrt(bm->drift * bm->drift + 2.0 * s2 * r);
        double up = (-bm->drift + disc) / s2;
        double down = (-bm->drift - disc) / s2;
        FundamentalSolutions f(std::make_shared<BmImpl>(up, down), FundamentalSource::ClosedForm, spec.a, spec.b);
        f.set_wronskian_samples(std::vector<double>(32, up - down));
        return f;
    }
    if (auto* g = std::get_if<GeometricBM>(&spec.kind)) {
        if (!(g->sigma > 0.0)) throw Error(ErrorCode::UnsupportedParameters, "sigma must be > 0");
        if (g->r_drift != r)
            throw Error(ErrorCode::UnsupportedParameters,
                        "closed-form GBM requires r_drift == rate_r; use the coefficient route");
        double gamma = 2.0 * r / (g->sigma * g->sigma);
        FundamentalSolutions f(std::make_shared<GbmImpl>(gamma), FundamentalSource::ClosedForm,
                               std::max(spec.a, 0.0), spec.b);
        f.set_wronskian_samples(std::vector<double>(32, 1.0 + gamma));
        return f;
    }
    if (auto* t = std::get_if<CustomTabulated>(&spec.kind)) {
        std::size_t n = t->grid.size();
        if (n < 4 || t->phi_values.size() != n || t->psi_values.size() != n)
            throw Error(ErrorCode::TabulationInvalid, "need >= 4 grid points and matching phi/psi lengths");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(t->phi_values[i] > 0.0) || !(t->psi_values[i] > 0.0))
                throw Error(ErrorCode::TabulationInvalid, "phi and psi must be positive");
            if (i > 0) {
                if (!(t->grid[i] > t->grid[i - 1]))
                    throw Error(ErrorCode::TabulationInvalid, "grid must be strictly increasing");
                if (!(t->phi_values[i] > t->phi_values[i - 1]))
                    throw Error(ErrorCode::TabulationInvalid, "phi must be strictly increasing");
                if (!(t->psi_values[i] < t->psi_values[i - 1]))
                    throw Error(ErrorCode::TabulationInvalid, "psi must be strictly decreasing");
            }
        }
        auto impl = std::make_shared<TabulatedImpl>(*t);
        FundamentalSolutions f(impl, FundamentalSource::Tabulated, t->grid.front(), t->grid.back());
        std::vector<double> w;
        for (double x : t->grid) w.push_back(impl->dphi(x) * impl->psi(x) - impl->phi(x) * impl->dpsi(x));
        f.set_wronskian_samples(std::move(w));
        return f;
    }
    const auto& c = std::get<CustomCoefficients>(spec.kind);
    PayoffExpr mu = c.mu, D = c.D;
    return fundamental_solutions_numeric([mu](double x) { return mu.eval(x); },
                                         [D](double x) { return D.eval(x); }, r, c.ode_lo, c.ode_hi,
                                         c.anchor, 0.0);
}

FundamentalSolutions fundamental_solutions_numeric(const std::function<double(double)>& mu,
                                                   const std::function<double(double)>& D, double rate_r,
                                                   double a, double b, double anchor, double eta) {
    if (!(rate_r > 0.0)) throw Error(ErrorCode::UnsupportedParameters, "rate_r must be > 0");
    double lo = a + eta, hi = b - eta;
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw Error(ErrorCode::UnsupportedParameters, "numeric route needs a finite truncated interval");
    if (!(anchor > lo && anchor < hi))
        throw Error(ErrorCode::UnsupportedParameters, "anchor must lie inside the truncated interval");

    // Each solution is integrated away from the end where it vanishes, which
    // is the direction in which it dominates.
    auto impl = std::make_shared<NumericImpl>();
    impl->tphi = integrate_branch(mu, D, rate_r, lo, hi, 1.0);
    impl->tpsi = integrate_branch(mu, D, rate_r, hi, lo, -1.0);
    impl->cphi = 1.0 / impl->tphi.value(anchor);
    impl->cpsi = 1.0 / impl->tpsi.value(anchor);

    for (const auto* tr : {&impl->tphi, &impl->tpsi}) {
        bool increasing = tr == &impl->tphi;
        for (std::size_t i = 1; i + 1 < tr->x.size(); ++i) {
            bool ok = tr->f[i] > 0.0 && (increasing ? tr->df[i] > 0.0 : tr->df[i] < 0.0);
            if (!ok)
                throw Error(ErrorCode::DegenerateSystem,
                            std::string(increasing ? "phi" : "psi") + " not positive/monotone at x=" + num(tr->x[i]));
        }
    }

    FundamentalSolutions f(impl, FundamentalSource::NumericODE, lo, hi);

    // Wronskian over scale density, normalized at the anchor.
    std::vector<double> w;
    for (double x : sample_points(lo, hi, 32)) {
        double s = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            [&](double t) { return mu(t) / D(t); }, anchor, x, 8, 1e-12);
        double wr = f.dphi(x) * f.psi(x) - f.phi(x) * f.dpsi(x);
        double mag = std::fabs(f.dphi(x) * f.psi(x)) + std::fabs(f.phi(x) * f.dpsi(x));
        if (!(std::fabs(wr) > 1e-12 * mag))
            throw Error(ErrorCode::DegenerateSystem, "phi and psi numerically dependent at x=" + num(x));
        w.push_back(wr * std::exp(s));
    }
    f.set_wronskian_samples(std::move(w));
    return f;
}

ExitLaplace exit_laplace(const FundamentalSolutions& fund, double x, double y, double z) {
    if (!(y <= x && x <= z))
        throw Error(ErrorCode::OrderingViolated, "need y <= x <= z, got y=" + num(y) + " x=" + num(x) + " z=" + num(z));
    if (x == y) return {1.0, 0.0};
    if (x == z) return {0.0, 1.0};
    bool lower = std::isfinite(y), upper = std::isfinite(z);
    if (!lower && !upper) return {0.0, 0.0};
    if (!upper) return {fund.psi(x) / fund.psi(y), 0.0};
    if (!lower) return {0.0, fund.phi(x) / fund.phi(z)};
    double px = fund.phi(x), py = fund.phi(y), pz = fund.phi(z);
    double qx = fund.psi(x), qy = fund.psi(y), qz = fund.psi(z);
    double den = pz * qy - py * qz;
    return {(pz * qx - px * qz) / den, (px * qy - py * qx) / den};
}

}  // namespace stopgame

#include "stopgame/scale.hpp"

#include "stopgame/error.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>

namespace stopgame {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double natural(const FundamentalSolutions& f, ScaleDirection d, double x) {
    return d == ScaleDirection::UsePsiScale ? f.phi(x) / f.psi(x) : -f.psi(x) / f.phi(x);
}

// Inverse of a strictly increasing map on [lo, hi] by bracketing root search.
double invert(const FundamentalSolutions& f, ScaleDirection d, double y, double lo, double hi) {
    double ylo = natural(f, d, lo), yhi = natural(f, d, hi);
    if (y <= ylo) return lo;
    if (y >= yhi) return hi;
    std::uintmax_t iters = 200;
    auto g = [&](double x) { return natural(f, d, x) - y; };
    auto r = boost::math::tools::toms748_solve(g, lo, hi, ylo - y, yhi - y,
                                               boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace

ScaleTransform::ScaleTransform(FundamentalSolutions fund, std::vector<double> x_grid, ScaleDirection dir)
    : fund_(std::move(fund)), x_(std::move(x_grid)), dir_(dir) {
    y_.reserve(x_.size());
    for (double x : x_) y_.push_back(natural(fund_, dir_, x));
    for (std::size_t i = 1; i < y_.size(); ++i) {
        if (!(y_[i] > y_[i - 1]))
            throw Error(ErrorCode::NonMonotoneScale,
                        "scale not strictly increasing between x=" + num(x_[i - 1]) + " and x=" + num(x_[i]));
    }
}

double ScaleTransform::scale(double x) const { return natural(fund_, dir_, x); }

double ScaleTransform::dscale(double x) const {
    double p = fund_.phi(x), q = fund_.psi(x), dp = fund_.dphi(x), dq = fund_.dpsi(x);
    return dir_ == ScaleDirection::UsePsiScale ? (dp * q - p * dq) / (q * q) : (q * dp - dq * p) / (p * p);
}

double ScaleTransform::den(double x) const {
    return dir_ == ScaleDirection::UsePsiScale ? fund_.psi(x) : fund_.phi(x);
}

double ScaleTransform::dden(double x) const {
    return dir_ == ScaleDirection::UsePsiScale ? fund_.dpsi(x) : fund_.dphi(x);
}

double ScaleTransform::to_natural(double x) const {
    if (x < x_.front() || x > x_.back())
        throw Error(ErrorCode::OutOfRange, "x=" + num(x) + " outside [" + num(x_.front()) + ", " + num(x_.back()) + "]");
    return scale(x);
}

double ScaleTransform::from_natural(double y) const {
    double tol = 1e-12 * (y_.back() - y_.front());
    if (y < y_.front() - tol || y > y_.back() + tol)
        throw Error(ErrorCode::OutOfRange, "y=" + num(y) + " outside the grid range");
    return invert(fund_, dir_, y, x_.front(), x_.back());
}

ScaleTransform build_scale(const FundamentalSolutions& fund, double lo, double hi, std::size_t n,
                           Spacing spacing, ScaleDirection direction) {
    if (n < 3) throw Error(ErrorCode::OutOfRange, "grid needs n >= 3");
    if (!(lo < hi)) throw Error(ErrorCode::OutOfRange, "grid needs lo < hi");
    std::vector<double> xs(n);
    const double m = static_cast<double>(n - 1);
    switch (spacing) {
        case Spacing::UniformX:
            for (std::size_t i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * (static_cast<double>(i) / m);
            break;
        case Spacing::LogX: {
            if (!(lo > 0.0)) throw Error(ErrorCode::OutOfRange, "LogX spacing needs lo > 0");
            double l0 = std::log(lo), l1 = std::log(hi);
            for (std::size_t i = 0; i < n; ++i) xs[i] = std::exp(l0 + (l1 - l0) * (static_cast<double>(i) / m));
            break;
        }
        case Spacing::UniformY: {
            double y0 = natural(fund, direction, lo), y1 = natural(fund, direction, hi);
            for (std::size_t i = 0; i < n; ++i)
                xs[i] = invert(fund, direction, y0 + (y1 - y0) * (static_cast<double>(i) / m), lo, hi);
            break;
        }
    }
    xs.front() = lo;
    xs.back() = hi;
    return ScaleTransform(fund, std::move(xs), direction);
}

ScaleTransform build_scale(const DiffusionSpec& spec, const FundamentalSolutions& fund, std::size_t n,
                           Spacing spacing, ScaleDirection direction) {
    return build_scale(fund, spec.lo, spec.hi, n, spacing, direction);
}

}  // namespace stopgame

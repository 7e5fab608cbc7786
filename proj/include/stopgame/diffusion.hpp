#pragma once

#include "stopgame/payoff_expr.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

namespace stopgame {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// dX = drift dt + sigma dW
struct BrownianMotion {
    double drift = 0.0;
    double sigma = 1.0;
};

/// dX = r_drift X dt + sigma X dW on (0, inf)
struct GeometricBM {
    double r_drift = 0.05;
    double sigma = 0.3;
};

/// phi and psi given on a grid; no SDE coefficients are known.
struct CustomTabulated {
    std::vector<double> grid;
    std::vector<double> phi_values;
    std::vector<double> psi_values;
};

/// Generator coefficients as expressions in x: L f = mu f' + D f''.
/// The ODE for phi and psi is integrated on [ode_lo, ode_hi].
struct CustomCoefficients {
    PayoffExpr mu;
    PayoffExpr D;
    double anchor = 0.0;
    double ode_lo = 0.0;
    double ode_hi = 1.0;
};

struct Boundary {
    enum class Kind { Natural, Absorbing };
    Kind kind = Kind::Natural;
    double at = 0.0;
};

struct DiffusionSpec {
    std::variant<BrownianMotion, GeometricBM, CustomTabulated, CustomCoefficients> kind;
    double rate_r = 0.05;
    double a = -kInf;  ///< state interval (a, b)
    double b = kInf;
    double lo = 0.0;   ///< truncated working interval [lo, hi] inside (a, b)
    double hi = 0.0;
    Boundary left;
    Boundary right;

    /// SDE drift and volatility for simulation. Throws for tabulated kinds.
    double sde_drift(double x) const;
    double sde_vol(double x) const;
    bool has_sde() const;

    /// Throws UnsupportedParameters on rate/sigma/interval violations.
    void validate() const;
};

/// Fills lo/hi when unset (lo >= hi). Finite ends move in by 1e-4 of the width,
/// the GBM origin by 1e-4 * ref_scale and an infinite GBM top sits at 10 * ref_scale.
/// Infinite ends of other kinds must be given explicitly.
DiffusionSpec with_default_truncation(DiffusionSpec spec, double ref_scale);

enum class FundamentalSource { ClosedForm, Tabulated, NumericODE };

/// Increasing (phi) and decreasing (psi) positive solutions of L f = r f.
/// Immutable; copies share the underlying data.
class FundamentalSolutions {
public:
    struct Impl {
        virtual ~Impl() = default;
        virtual double phi(double x) const = 0;
        virtual double psi(double x) const = 0;
        virtual double dphi(double x) const = 0;
        virtual double dpsi(double x) const = 0;
    };

    FundamentalSolutions() = default;
    FundamentalSolutions(std::shared_ptr<const Impl> impl, FundamentalSource source, double lo,
                         double hi);

    double phi(double x) const { return impl_->phi(x); }
    double psi(double x) const { return impl_->psi(x); }
    double dphi(double x) const { return impl_->dphi(x); }
    double dpsi(double x) const { return impl_->dpsi(x); }

    FundamentalSource source() const { return source_; }
    /// Closed range where evaluation is meaningful.
    double lo() const { return lo_; }
    double hi() const { return hi_; }

    /// Wronskian phi' psi - phi psi' divided by the scale density (constant for
    /// an exact pair); raw Wronskian when the coefficients are unknown.
    const std::vector<double>& wronskian_samples() const { return wronskian_; }
    void set_wronskian_samples(std::vector<double> w) { wronskian_ = std::move(w); }

    /// Returns a copy with phi and psi both multiplied by c > 0.
    FundamentalSolutions scaled(double c) const;

private:
    std::shared_ptr<const Impl> impl_;
    FundamentalSource source_ = FundamentalSource::ClosedForm;
    double lo_ = 0.0;
    double hi_ = 0.0;
    std::vector<double> wronskian_;
};

FundamentalSolutions fundamental_solutions(const DiffusionSpec& spec);

FundamentalSolutions fundamental_solutions_numeric(const std::function<double(double)>& mu,
                                                   const std::function<double(double)>& D,
                                                   double rate_r, double a, double b,
                                                   double anchor, double eta);

struct ExitLaplace {
    double p_lower = 0.0;  ///< E_x[e^{-rT_y}; T_y < T_z]
    double p_upper = 0.0;  ///< E_x[e^{-rT_z}; T_z < T_y]
};

/// y may be -inf and z may be +inf (single-sided exits).
ExitLaplace exit_laplace(const FundamentalSolutions& fund, double x, double y, double z);

}  // namespace stopgame

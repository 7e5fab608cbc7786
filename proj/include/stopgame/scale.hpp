#pragma once

#include "stopgame/diffusion.hpp"

#include <vector>

namespace stopgame {

enum class Spacing { UniformX, UniformY, LogX };

/// UsePsiScale works with F = phi/psi and divides payoffs by psi; the scale
/// origin F = 0 sits at the left end a. UsePhiScale works with
/// F~ = -psi/phi, divides by phi, and has its origin at the right end b.
enum class ScaleDirection { UsePsiScale, UsePhiScale };

/// Discrete natural-scale grid. Immutable after construction.
class ScaleTransform {
public:
    ScaleTransform() = default;
    ScaleTransform(FundamentalSolutions fund, std::vector<double> x_grid, ScaleDirection dir);

    const FundamentalSolutions& fund() const { return fund_; }
    const std::vector<double>& x_grid() const { return x_; }
    const std::vector<double>& y_grid() const { return y_; }
    ScaleDirection direction() const { return dir_; }
    std::size_t size() const { return x_.size(); }

    /// Scale map of the active direction, defined on the whole fund range.
    double scale(double x) const;
    double dscale(double x) const;
    /// Divisor of the active direction (psi or phi) and its derivative.
    double den(double x) const;
    double dden(double x) const;

    /// Grid-range checked forward and inverse maps.
    double to_natural(double x) const;
    double from_natural(double y) const;

private:
    FundamentalSolutions fund_;
    std::vector<double> x_, y_;
    ScaleDirection dir_ = ScaleDirection::UsePsiScale;
};

/// Grid of n points spanning [lo, hi].
ScaleTransform build_scale(const FundamentalSolutions& fund, double lo, double hi, std::size_t n,
                           Spacing spacing, ScaleDirection direction);

/// Same, over the truncated interval of the spec.
ScaleTransform build_scale(const DiffusionSpec& spec, const FundamentalSolutions& fund, std::size_t n,
                           Spacing spacing, ScaleDirection direction);

}  // namespace stopgame

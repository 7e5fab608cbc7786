#pragma once

#include "stopgame/payoff_expr.hpp"
#include "stopgame/scale.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace stopgame {

/// How a corridor end is held.
///   Pinned: a point (y, value); y may be a virtual point beyond the grid
///           (the scale origin) or coincide with the grid end.
///   Slope:  unbounded end; the envelope's asymptotic slope there is `slope`.
struct EndCondition {
    enum class Kind { Pinned, Slope };
    Kind kind = Kind::Pinned;
    double y = 0.0;
    double value = 0.0;
    double slope = 0.0;

    static EndCondition pinned(double y, double value) { return {Kind::Pinned, y, value, 0.0}; }
    static EndCondition with_slope(double s) { return {Kind::Slope, 0.0, 0.0, s}; }
};

/// Limit of a ratio at a natural boundary, estimated from the grid tail.
struct BoundaryLimit {
    double value = 0.0;     ///< extrapolated limit
    double tail = 0.0;      ///< ratio at the outermost grid point
    double tol = 0.0;       ///< threshold below which the limit counts as zero
    bool monotone = true;   ///< tail sequence monotone over the last 10 points
};

struct TransformOptions {
    std::optional<double> l_a;  ///< overrides for the boundary limits and origin value
    std::optional<double> l_b;
    std::optional<double> w0;
    bool require_zero_limits = false;  ///< throw GrowthViolation on l_a or l_b > tol
};

/// Rescaled obstacles W^G <= W_H on a natural-scale grid, plus end conditions.
struct TransformedObstacle {
    std::vector<double> y;
    std::vector<double> wg;
    std::optional<std::vector<double>> wh;
    EndCondition left;
    EndCondition right;

    // Present when built from a diffusion; absent for raw corridors.
    std::shared_ptr<const ScaleTransform> st;
    std::optional<PayoffSpec> payoff;

    BoundaryLimit l_a;     ///< lim G+/psi at a
    BoundaryLimit l_b;     ///< lim G+/phi at b
    BoundaryLimit gap_a;   ///< lim (H-G)/psi at a
    BoundaryLimit gap_b;   ///< lim (H-G)/phi at b
    double w0 = 0.0;       ///< value at the scale origin

    std::size_t size() const { return y.size(); }
    bool has_upper() const { return wh.has_value(); }
    double upper(std::size_t i) const { return wh ? (*wh)[i] : kInf; }
};

TransformedObstacle transform_payoff(std::shared_ptr<const ScaleTransform> st, const PayoffSpec& payoff,
                                     const TransformOptions& opts = {});

/// Raw corridor on an explicit grid with both ends pinned at the grid ends to
/// the midpoint (wg+wh)/2. Throws EndsNotAnchored when the end gap exceeds
/// 1e-3 (max wh - min wg).
TransformedObstacle make_corridor(std::vector<double> y, std::vector<double> wg,
                                  std::optional<std::vector<double>> wh);

struct AssumptionReport {
    bool g_le_h = true;
    bool stuck_together = true;
    bool stuck_a = true;
    bool stuck_b = true;
    bool l_a_zero = true;
    bool l_b_zero = true;
    double worst_order_violation = 0.0;  ///< max (wg - wh), <= 0 when ordered
    BoundaryLimit l_a, l_b, gap_a, gap_b;
};

AssumptionReport check_assumptions(const TransformedObstacle& tob);

}  // namespace stopgame

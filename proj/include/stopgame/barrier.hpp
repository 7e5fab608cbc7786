#pragma once

#include "stopgame/envelope.hpp"
#include "stopgame/transform.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace stopgame {

/// Constrained biconjugate v with wg <= v <= wh on the grid.
struct TautEnvelope {
    std::vector<double> values;
    std::vector<double> eps_star;    ///< values - wg
    std::vector<double> delta_star;  ///< wh - values (inf without an upper obstacle)
    std::vector<bool> contact_lower;
    std::vector<bool> contact_upper;
    double tol = 0.0;
    std::size_t iterations = 0;      ///< fixpoint sweeps; 0 for the direct solver
};

/// Intercepts of the line y -> p + c (y - y_x) with the obstacles around x.
struct LineProbe {
    double l_G = -kInf, r_G = kInf;
    double l_H = -kInf, r_H = kInf;
    double L = -kInf, R = kInf;
};

enum class SupInfSide { SupSup, InfInf, InfSup, SupInf };

/// Shortest path between the obstacles honoring the end conditions (funnel
/// algorithm, O(n)). Without an upper obstacle this is the concave majorant.
TautEnvelope taut_string(const TransformedObstacle& tob);

/// Projected over-relaxed Gauss-Seidel iteration of the discrete double-obstacle
/// problem from v = (wg + wh)/2. Pinned ends only. Throws NoConvergence.
TautEnvelope double_obstacle_fixpoint(const TransformedObstacle& tob, double tol = 1e-13,
                                      std::size_t max_iter = 2'000'000);

/// Literal sup/inf formulas over candidate slopes (pairwise secants of all
/// obstacle vertices). Pinned ends only; n <= 257 else GridTooLarge.
std::vector<double> supinf_bruteforce(const TransformedObstacle& tob, SupInfSide side);

LineProbe line_probe(const TransformedObstacle& tob, std::size_t x_index, double c, double p);

/// (sub_GH, super_HG): slopes c such that the line through (x, wh_x) stays
/// below wh until it meets wg, resp. through (x, wg_x) stays above wg until
/// it meets wh.
std::pair<SlopeInterval, SlopeInterval> modified_differentials(const TautEnvelope& te,
                                                               const TransformedObstacle& tob,
                                                               std::size_t x_index);

/// Wraps a finished value sequence with its contact profiles.
TautEnvelope make_envelope(const TransformedObstacle& tob, std::vector<double> values);

}  // namespace stopgame

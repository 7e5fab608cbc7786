#pragma once

#include "stopgame/transform.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace stopgame {

/// Closed slope interval [lo, hi]; empty when lo > hi.
struct SlopeInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool empty() const { return lo > hi; }
    bool contains(double c, double tol = 0.0) const { return c >= lo - tol && c <= hi + tol; }
};

struct EnvelopeResult {
    std::vector<double> values;       ///< f** on the grid
    std::vector<bool> contact;        ///< f** = f within tol_eq
    std::vector<std::pair<std::size_t, std::size_t>> segments;  ///< maximal non-contact runs [start, end]
    std::vector<double> eps_profile;  ///< f** - f
    double tol_eq = 0.0;
};

/// Least concave majorant of the samples (y_i, f_i) by a monotone-chain hull.
/// A Pinned end adds a point (virtual when outside the grid, replacing the end
/// sample when it coincides with it). A Slope end s constrains the majorant's
/// slope: at least s on the right end, at most s on the left end.
/// Throws AnchorBelowF when a pinned end value lies below f at that grid end.
EnvelopeResult least_concave_majorant(const std::vector<double>& y, const std::vector<double>& f,
                                      const std::optional<EndCondition>& left = std::nullopt,
                                      const std::optional<EndCondition>& right = std::nullopt);

/// min_i (c y_i - f_i)
double concave_conjugate(const std::vector<double>& y, const std::vector<double>& f, double c);

/// min over c in c_grid of (c y_i - f_*(c)), for every grid point.
std::vector<double> biconjugate_from_conjugate(const std::vector<double>& y, const std::vector<double>& f,
                                               const std::vector<double>& c_grid);

/// Every secant slope (f_j - f_i)/(y_j - y_i), i < j.
std::vector<double> secant_slopes(const std::vector<double>& y, const std::vector<double>& f);

/// Slopes c with f_j - f_i <= c (y_j - y_i) for all j.
SlopeInterval superdifferential_at(const std::vector<double>& y, const std::vector<double>& f, std::size_t i);

/// sup over secant slopes c of the highest line of slope c through y_i that
/// still meets f on both sides of y_i.
std::vector<double> tangent_envelope(const std::vector<double>& y, const std::vector<double>& f);

}  // namespace stopgame

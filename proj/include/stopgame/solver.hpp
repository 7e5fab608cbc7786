#pragma once

#include "stopgame/barrier.hpp"
#include "stopgame/diffusion.hpp"
#include "stopgame/payoff_expr.hpp"
#include "stopgame/scale.hpp"
#include "stopgame/transform.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stopgame {

/// Closed interval of the state space; ends may be infinite.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

struct SolveOptions {
    std::size_t n = 4097;
    Spacing spacing = Spacing::UniformX;
    ScaleDirection direction = ScaleDirection::UsePsiScale;
    std::optional<double> l_a;  ///< boundary limit overrides
    std::optional<double> l_b;
    std::optional<double> w0;
    bool polish = true;       ///< refine free boundaries off the grid
    bool cross_check = true;  ///< solve in the other scale too (stopping problems)
};

/// Piecewise description of a value function: on each piece V is G, H, or
/// (p + c s(x)) d(x) where s is the scale map and d its divisor.
class ValueFunction {
public:
    enum class Kind { Lower, Upper, Line };
    struct Piece {
        double x_lo, x_hi;
        Kind kind;
        double p = 0.0, c = 0.0;  ///< line in natural scale (Line pieces)
        bool both = false;        ///< G = H on this contact piece
    };

    ValueFunction() = default;
    ValueFunction(std::shared_ptr<const ScaleTransform> st, PayoffSpec payoff, std::vector<Piece> pieces);

    double operator()(double x) const;
    /// V / den in natural scale at x.
    double scaled(double x) const;
    const std::vector<Piece>& pieces() const { return pieces_; }
    const Piece& piece_at(double x) const;

private:
    std::shared_ptr<const ScaleTransform> st_;
    PayoffSpec payoff_;
    std::vector<Piece> pieces_;
};

/// One smooth-fit check at a free-boundary point.
struct SmoothFitEntry {
    double x = 0.0;
    char obstacle = 'G';      ///< 'G' for a boundary of D+, 'H' for D-
    bool continuation_right = true;
    double slope = 0.0;       ///< d(V/den)/ds from the continuation side
    double d_plus = 0.0;      ///< right derivative of the obstacle in natural scale
    double d_minus = 0.0;     ///< left derivative
    bool contained = false;   ///< slope lies between d_plus and d_minus
    double mismatch = 0.0;    ///< distance of slope from that interval
};

struct StoppingComponent {
    double a_star = 0.0;
    double b_star = 0.0;
};

struct StoppingSolution {
    ValueFunction V;
    std::vector<Interval> C;
    std::vector<Interval> D;
    std::vector<StoppingComponent> thresholds;  ///< one per component of D
    std::vector<SmoothFitEntry> smooth_fit;
    double dual_route_discrepancy = 0.0;        ///< max rel. difference of the two scale routes
    TransformedObstacle tob;
    TautEnvelope te;
};

enum class Equilibrium { NashSaddle, StackelbergOnly, NoNash, Degenerate };
std::string to_string(Equilibrium e);

struct GameSolution {
    ValueFunction V;
    std::vector<Interval> D_plus;
    std::vector<Interval> D_minus;
    Equilibrium equilibrium = Equilibrium::NashSaddle;
    std::vector<SmoothFitEntry> smooth_fit;
    AssumptionReport assumptions;
    TransformedObstacle tob;
    TautEnvelope te;

    /// Nearest points of D+ below and above x (x itself when x is in D+),
    /// -inf/+inf when there are none.
    std::pair<double, double> tau_thresholds(double x) const;
    /// Same for D-.
    std::pair<double, double> sigma_thresholds(double x) const;
};

StoppingSolution solve_stopping(const DiffusionSpec& spec, const PayoffSpec& payoff, const SolveOptions& opts = {});

/// Stopping problem for the process absorbed at alpha and beta.
StoppingSolution solve_stopping_absorbed(const DiffusionSpec& spec, const PayoffSpec& payoff, double alpha,
                                         double beta, const SolveOptions& opts = {});

GameSolution solve_game(const DiffusionSpec& spec, const PayoffSpec& payoff, const SolveOptions& opts = {});

/// Smooth-fit entries for every free-boundary point of a solution.
std::vector<SmoothFitEntry> smooth_fit_report(const ValueFunction& V, const ScaleTransform& st,
                                              const PayoffSpec& payoff);

/// Grid version for raw corridors: at every contact point adjacent to a free
/// cell, the string's slope on the free side against the one-sided slopes of
/// the touched obstacle.
std::vector<SmoothFitEntry> grid_smooth_fit(const TransformedObstacle& tob, const TautEnvelope& te);

}  // namespace stopgame

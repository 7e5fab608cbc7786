#pragma once

#include "stopgame/diffusion.hpp"
#include "stopgame/payoff_expr.hpp"
#include "stopgame/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stopgame {

struct McConfig {
    std::size_t paths = 100000;
    double dt = 1e-3;
    double horizon = 0.0;          ///< 0 selects default_horizon
    std::uint64_t seed = 42;
    bool antithetic = false;
    double horizon_value = 0.0;    ///< payoff credited to paths still running at the horizon
    std::optional<double> budget;  ///< max paths * horizon / dt; default from mc_budget()
    unsigned threads = 0;          ///< 0: hardware concurrency
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths_used = 0;
    double truncation_mass = 0.0;  ///< fraction of paths that reached the horizon
};

/// Stop when X <= lo or X >= hi. Infinite ends never trigger.
struct Thresholds {
    double lo = -kInf;
    double hi = kInf;
    bool hit(double x) const { return x <= lo || x >= hi; }
};

/// One (tau, sigma) pair evaluated on the shared paths. G is paid when tau
/// fires first (ties included), H when sigma fires strictly first.
struct McTarget {
    const PayoffExpr* G = nullptr;
    const PayoffExpr* H = nullptr;  ///< may be null when sigma never fires
    Thresholds tau;
    Thresholds sigma;
};

/// Work cap from STOPGAME_BUDGET, default 1e11 Euler steps.
double mc_budget();

/// Horizon T with exp(-r T) payoff_scale = 1e-4 value_scale.
double default_horizon(double rate_r, double payoff_scale, double value_scale);

/// Horizon actually used for a problem: cfg.horizon or the default with the
/// largest |payoff| over the truncated interval as both scales.
double resolve_horizon(const DiffusionSpec& spec, const PayoffSpec& payoff, const McConfig& cfg);

/// Simulates once and evaluates every target on every path (common random
/// numbers). per_path, when given, receives the discounted payoffs indexed
/// [target][sample] where a sample is a path or an antithetic pair.
std::vector<McEstimate> simulate_multi(const DiffusionSpec& spec, double x0, const std::vector<McTarget>& targets,
                                       const McConfig& cfg, double horizon,
                                       std::vector<std::vector<double>>* per_path = nullptr);

McEstimate simulate_R(const DiffusionSpec& spec, const PayoffSpec& payoff, double x0, Thresholds tau,
                      Thresholds sigma, const McConfig& cfg);

/// Estimates on fixed Brownian increments at dt, dt/2, ..., dt/2^(levels-1).
std::vector<McEstimate> refinement_series(const DiffusionSpec& spec, const PayoffSpec& payoff, double x0,
                                          Thresholds tau, Thresholds sigma, const McConfig& cfg, int levels);

struct Perturbation {
    enum class Player { Tau, Sigma };
    Player player = Player::Sigma;
    Thresholds thr;
    std::string label;
};

struct SaddleEntry {
    Perturbation pert;
    McEstimate estimate;
    double diff = 0.0;     ///< mean of R(perturbed) - R(equilibrium), path by path
    double se_diff = 0.0;  ///< standard error of that paired difference
    bool pass = false;
};

struct SaddleReport {
    McEstimate base;
    Thresholds tau_star, sigma_star;
    std::vector<SaddleEntry> entries;
    bool all_pass = true;
};

/// Checks R(tau, sigma*) <= R(tau*, sigma*) <= R(tau*, sigma) within 3 SE
/// for each perturbation, on common paths.
SaddleReport saddle_check(const DiffusionSpec& spec, const PayoffSpec& payoff, double x0, const GameSolution& sol,
                          const std::vector<Perturbation>& perturbations, const McConfig& cfg);

}  // namespace stopgame

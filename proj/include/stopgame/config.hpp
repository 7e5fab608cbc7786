#pragma once

#include "stopgame/diffusion.hpp"
#include "stopgame/mc.hpp"
#include "stopgame/payoff_expr.hpp"
#include "stopgame/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stopgame {

/// A problem read from a `section.key = value` file.
struct ProblemConfig {
    DiffusionSpec diffusion;  ///< truncation already resolved
    PayoffSpec payoff;
    SolveOptions solve;
    McConfig mc;
    std::optional<double> x0;    ///< starting point for verification
    std::vector<double> points;  ///< where to print V
};

/// Throws ConfigError naming the line and key on any problem.
ProblemConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ProblemConfig load_config(const std::string& path);

/// Every accepted key, for documentation and error hints.
const std::vector<std::string>& config_keys();

}  // namespace stopgame

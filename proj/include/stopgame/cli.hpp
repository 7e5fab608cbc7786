#pragma once

#include "stopgame/config.hpp"
#include "stopgame/error.hpp"

#include <iosfwd>
#include <string>

namespace stopgame {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumeric = 2, kExitAssumption = 3 };

ExitCode exit_code_for(ErrorCode code);

/// Config text of a built-in example ("put" or "israeli-put"). A negative
/// delta selects half of the critical cancellation premium.
std::string example_config(const std::string& name, double K, double r, double sigma, double delta);

/// Critical premium above which cancelling never pays in the Israeli put.
double israeli_delta_star(double K, double r, double sigma);

/// Writes the grid CSV for a stopping or game solution.
void write_csv(std::ostream& os, const TransformedObstacle& tob, const TautEnvelope& te, const ValueFunction& V);

/// Entry point; returns the process exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stopgame

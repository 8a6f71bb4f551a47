#ifndef SPCKD_TOOLS_CLI_HPP
#define SPCKD_TOOLS_CLI_HPP

#include <string>
#include <vector>

namespace spckd::cli {

// Entry point behind the `spckd` binary. Subcommands: train-teacher,
// train-baseline, distill, eval, gradcheck, report. Returns 0 on success,
// 1 on runtime failure, 2 on usage errors.
int run_command(const std::vector<std::string>& args);

}  // namespace spckd::cli

#endif  // SPCKD_TOOLS_CLI_HPP

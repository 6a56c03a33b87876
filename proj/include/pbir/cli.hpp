#pragma once

#include <string>
#include <vector>

#include "pbir/config.hpp"

namespace pbir {

/// Artifacts written by a command, in write order.
struct CommandResult {
    std::vector<std::string> outputs;
};

CommandResult cmd_phantom(const ExperimentConfig& cfg, bool force);
CommandResult cmd_simulate(const ExperimentConfig& cfg, bool force);
CommandResult cmd_recon(const ExperimentConfig& cfg, bool force);
CommandResult cmd_path(const ExperimentConfig& cfg, bool force);
CommandResult cmd_metrics(const ExperimentConfig& cfg, bool force);
CommandResult cmd_nps(const ExperimentConfig& cfg, bool force);

/// Full command-line entry point (args exclude argv[0]). Prints a one-line
/// diagnostic and returns nonzero on any validation or runtime failure.
int run_cli(const std::vector<std::string>& args);

} // namespace pbir

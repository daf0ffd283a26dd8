#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dutrpca/config_file.hpp"
#include "dutrpca/unfolding.hpp"

namespace dutrpca {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitRuntime = 1,
    kExitUsage = 2,
};

/// Runs the tool on `args` (without the program name), writing to `out` / `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Network, optimizer and init-seed settings read from a train/denoise config file.
struct TrainSettings {
    UnfoldingConfig net;
    TrainConfig train;
    std::uint64_t init_seed = 0;
};

TrainSettings parse_train_settings(const KeyValues& kv);

/// Loads sorted `<name>.clean.cube` / `<name>.noisy.cube` pairs from `dir`.
std::vector<TrainingSample> load_training_pairs(const std::string& dir);

} // namespace dutrpca

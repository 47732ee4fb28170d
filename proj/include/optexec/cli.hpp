#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace optexec {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitNumerical = 3,
};

struct CliOptions {
    std::string command;  ///< solve | boundary | simulate | oracle-compare | sweep
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> out_dir;  ///< overrides output.dir
    std::optional<std::uint64_t> seed;             ///< overrides seed
};

/// Runs one command and writes its artifacts. Errors are reported on `err` and mapped to
/// kExitConfig (invalid input) or kExitNumerical (solver failure, with the time level).
int run(const CliOptions& options, std::ostream& log, std::ostream& err);

}  // namespace optexec

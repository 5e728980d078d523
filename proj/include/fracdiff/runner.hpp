#pragma once

#include "fracdiff/config.hpp"
#include "fracdiff/io.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace fracdiff {

/// Process exit codes of a scenario run.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitModuleError = 3,
    kExitChecksFailed = 4,
};

struct RunOptions {
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;  ///< overrides the config seed
    int refine = 0;                     ///< each level halves h and dt
    std::string config_label;           ///< recorded in the manifest (usually the path)
};

struct RunOutcome {
    int exit_code = kExitOk;
    io::Json manifest;
};

std::string fracdiff_version();

/// Executes one scenario and writes its outputs plus manifest.json into out_dir.
/// Module errors are caught and recorded; the manifest is always written.
RunOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& opt);

/// Parses `text` first; diagnostics end the run with kExitConfig and are listed in the manifest.
RunOutcome run_config_text(const std::string& text, const RunOptions& opt);

/// Same for a file on disk.
RunOutcome run_config_file(const std::string& path, RunOptions opt);

}  // namespace fracdiff

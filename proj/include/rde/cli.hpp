#pragma once

#include "rde/config.hpp"
#include "rde/report.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rde {

/// Exit status contract of `rde run`.
enum ExitCode : int { kExitPass = 0, kExitError = 1, kExitBandFailure = 2 };

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
};

/// Side outputs of a pipeline run (CSV tables keyed by file suffix).
struct PipelineOutput {
    ExperimentReport report;
    std::vector<std::pair<std::string, std::string>> csv;  // suffix, content
};

/// Operators -> spectral predictors -> Monte Carlo -> report.
PipelineOutput execute(const ExperimentConfig& config);

/// Loads, runs and writes <out_dir>/<name>.json plus CSV files. Returns the
/// exit status; diagnostics go to `err`, a one-line summary to `out`.
int run_command(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
                std::ostream& err);

/// Built-in families, observable terms and experiment kinds, sorted.
std::string list_builtins();

/// Full command-line front end (`rde run ...`, `rde list`).
int cli_main(int argc, char** argv);

}  // namespace rde

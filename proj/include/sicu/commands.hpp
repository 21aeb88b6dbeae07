#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

#include "sicu/error.hpp"
#include "sicu/run_config.hpp"

namespace sicu {

/// Process exit codes of the sicu tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,       // unexpected error
    kExitUsage = 2,         // bad command line
    kExitConfig = 3,        // invalid or inconsistent configuration
    kExitData = 4,          // dataset / label file missing or malformed
    kExitModel = 5,         // checkpoint missing or malformed
    kExitLocked = 6,        // workspace held by another command
};

/// A prerequisite data artifact is absent; the message names the command
/// that produces it.
class MissingData : public IoError {
public:
    using IoError::IoError;
};

/// A checkpoint exists but cannot be used (corrupt, wrong architecture).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps an exception to its exit code.
int exit_code_for(const std::exception_ptr& error);

/// Runs `body`, printing any error to `err`; returns the exit code.
int run_guarded(std::ostream& err, const std::function<void()>& body);

/// Each command locks the workspace, prints the resolved config and seed,
/// and writes only under the workspace.
void cmd_generate(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, Stage stage, std::ostream& log);
void cmd_labels(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);

/// Re-emits CSV/SVG artifacts from a report.json (into its directory unless
/// out_dir is given). The input file is never rewritten.
void cmd_report(const std::filesystem::path& report_json, const std::optional<std::filesystem::path>& out_dir,
                std::ostream& log);

}  // namespace sicu

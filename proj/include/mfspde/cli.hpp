#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"
#include "mfspde/config.hpp"

namespace mfspde {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitConfig = 2, kExitNumerical = 3 };

struct CliRequest {
    std::string command;  // simulate | adjoint | harvest | picard | optimize | verify
    std::string config_path;
    std::string suite = "all";  // verify only
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
};

/// Config with the --seed, --out and --threads overrides applied.
RunConfig apply_overrides(RunConfig cfg, const CliRequest& req);

/// The config text that enters the bundle hash: threads and output
/// directory are normalized so neither changes the hash.
std::string hashed_config_text(const RunConfig& cfg);

/// One verification suite on a config. Every entry of "checks" carries a
/// name, a pass flag and the measured values. Throws ConfigError for an
/// unknown suite name.
nlohmann::json run_suite(const std::string& suite, const RunConfig& cfg);

/// Runs one command and writes its bundle. Messages go to out and err.
int run_command(const CliRequest& req, std::ostream& out, std::ostream& err);

/// Argument parsing plus run_command.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfspde

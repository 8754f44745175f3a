#ifndef EPITRACE_TOOLS_CLI_HPP
#define EPITRACE_TOOLS_CLI_HPP

#include <filesystem>
#include <ostream>
#include <string>

namespace epitrace::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "EPITRACE_CONFIG";

/// Runs the command line; messages go to `out` and `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& file);
std::string sha256_text(const std::string& text);

} // namespace epitrace::cli

#endif // EPITRACE_TOOLS_CLI_HPP

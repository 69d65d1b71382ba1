#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace etholabel {

// POSIX shell single-quoting; safe for paths with spaces and metacharacters.
std::string shell_quote(const std::string& s);

// Runs a command line through /bin/sh. Returns the process exit code,
// or -1 if the shell could not be started.
int run_shell(const std::string& cmd);

struct CommandResult {
    int exit_code = -1;
    std::string output;  // captured stdout
};

// Runs a command and captures stdout. stderr is discarded.
CommandResult run_shell_capture(const std::string& cmd);

std::string read_file(const std::filesystem::path& path);
std::string read_file_binary(const std::filesystem::path& path);

// Write-to-temp-then-rename; readers never observe partial content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Fixed-width zero-padded decimal, e.g. zero_pad(42, 6) == "000042".
std::string zero_pad(long value, int width);

// Shortest round-trip decimal form of a double ("0.2", "0.6666666666666666").
std::string format_double(double value);

double round_to_one_decimal(double value);

std::string to_lower(std::string s);

// Strips every whitespace character and lowercases; the token fold used
// for label matching.
std::string fold_token(std::string_view s);

std::string utc_timestamp();

void log_event(std::string_view level, std::string_view event, const std::string& details);

}  // namespace etholabel

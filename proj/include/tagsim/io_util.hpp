#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tagsim {

// Collects non-fatal warnings (clamped inputs, extrapolations, trace gaps).
// Callers that pass nullptr simply drop them.
struct Warnings {
    std::vector<std::string> messages;
    void add(std::string msg) { messages.push_back(std::move(msg)); }
    bool empty() const { return messages.empty(); }
};

inline void warn(Warnings* w, std::string msg) {
    if (w) w->add(std::move(msg));
}

// Writes content to path via a temp file + rename so readers never observe a
// partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Fixed-notation formatting used by all CSV/JSON emitters. Deterministic for
// a given build; no locale dependence.
std::string format_fixed(double value, int decimals);

// Shortest round-trip representation (%.17g trimmed); used where exact values
// matter more than column width.
std::string format_full(double value);

// Log verbosity, controlled by the TAGSIM_LOG environment variable
// (quiet|warn|info|debug; default warn).
enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

}  // namespace tagsim

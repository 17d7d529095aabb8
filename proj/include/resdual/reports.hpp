#pragma once

// Shared report plumbing. Every report the artifact emits goes through these
// helpers so that identical inputs always serialize to identical bytes:
// ordered JSON (insertion-order keys, nlohmann's shortest round-trip floats)
// and CSV with %.17g floats.

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace resdual {

using ordered_json = nlohmann::ordered_json;

// %.17g — shortest fixed convention that round-trips every double
std::string fmt_double(double v);

// window sizes serialize as the integer, or the string "full"
ordered_json window_json(std::int64_t window);
std::string window_str(std::int64_t window);

// writes via temp file + rename so readers never observe a partial report
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace resdual

#pragma once

#include <string>
#include <vector>

namespace critbatch {

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest decimal form that round-trips a double (17 significant digits).
std::string fmt17(double x);

/// strtod that accepts nan/inf spellings and rejects trailing garbage.
double parse_double(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// UTC timestamp, ISO 8601. Honors SOURCE_DATE_EPOCH for reproducible output.
std::string utc_timestamp();

}  // namespace critbatch

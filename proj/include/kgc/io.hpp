#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace kgc::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Splits one TSV line on tabs. Quoting is not supported.
std::vector<std::string_view> split_tabs(std::string_view line);

/// Calls `row` for every non-empty line of a TSV file with exactly
/// `columns` fields; anything else raises MalformedLine with the 1-based
/// line number. A trailing '\r' is stripped.
void for_each_row(const fs::path& path, std::size_t columns,
                  const std::function<void(std::span<const std::string_view>, std::size_t)>& row);

std::string read_text(const fs::path& path);
/// Writes through a temporary file and renames, so readers never see a
/// half-written artifact.
void write_text(const fs::path& path, std::string_view contents);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& value);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);
/// Hash of the canonical (compact) dump of a JSON value.
std::string sha256_json(const Json& value);

/// Nearest float32 value. Kept out of line: gcc 11 at -O3 vectorizes
/// visit loops and drops an inline double->float->double cast.
double to_float32(double value);

/// Little-endian IEEE-754 float32 blocks.
void write_f32(const fs::path& path, std::span<const double> values);
std::vector<double> read_f32(const fs::path& path);

/// Shortest text that parses back to the same double.
std::string format_real(double value);
double parse_real(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace kgc::io

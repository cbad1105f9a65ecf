#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cmc::io {

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// creating parent directories. Throws IoError with the path on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace cmc::io

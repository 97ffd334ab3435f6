#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace drcnn {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t hash_bytes(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Shortest text form of a double that parses back to the same bits.
std::string format_double(double value);

}  // namespace drcnn

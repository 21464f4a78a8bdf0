#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace alignmap {

/// Reads a whole file; throws IoError if unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes content to a temp file next to `path`, then renames over it.
/// Partial writes are never visible under the target name.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view data);

/// 16-hex-digit FNV-1a digest of the file contents.
std::string file_digest(const std::filesystem::path& path);

/// Shortest decimal form that round-trips to the same double.
std::string fmt_double(double v);

/// Fixed-precision decimal form (SVG coordinates).
std::string fmt_fixed(double v, int precision);

}  // namespace alignmap

#include "alignmap/io_util.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "alignmap/errors.hpp"

namespace alignmap {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read file: " + path.string());
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot write file: " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw IoError("rename failed: " + tmp.string() + " -> " + path.string() + ": " + ec.message());
  }
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string file_digest(const std::filesystem::path& path) {
  const std::uint64_t h = fnv1a64(read_file(path));
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) {
    buf[15 - i] = hex[(h >> (4 * i)) & 0xf];
  }
  buf[16] = '\0';
  return std::string(buf);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) {
    throw Error("to_chars failed");
  }
  return std::string(buf, ptr);
}

std::string fmt_fixed(double v, int precision) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
  if (ec != std::errc()) {
    throw Error("to_chars failed");
  }
  return std::string(buf, ptr);
}

}  // namespace alignmap

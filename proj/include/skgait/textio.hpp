#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace skgait {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// 17 significant digits in scientific notation; round-trips every double.
std::string format_exact(double v);

// FNV-1a, 64 bit. Stable across platforms; used for config hashes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace skgait

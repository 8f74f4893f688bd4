#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace atlas {

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);  // throws on malformed input

/// CRC-32 (IEEE 802.3, reflected), used for checkpoint and manifest checksums.
std::uint32_t crc32(std::string_view bytes, std::uint32_t seed = 0);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal form that round-trips to the same double. Keeps text
/// outputs byte-stable across reruns.
std::string format_double(double v);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace atlas

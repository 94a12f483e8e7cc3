#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mqaf {

// Shortest round-trippable decimal form; byte-stable across runs so hashed
// artifacts (manifests, reports, configs) reproduce exactly.
std::string format_double(double v);

// Strict full-token numeric parsers; throw ParseError naming the token.
double parse_double_strict(const std::string& token,
                           const std::string& context);
long long parse_int_strict(const std::string& token,
                           const std::string& context);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

// FNV-1a 64 of a file's contents, rendered as 16 hex digits.
std::string file_checksum_hex(const std::string& path);
std::string hex64(std::uint64_t v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace mqaf

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slicefuzz {

namespace fs = std::filesystem;

/// Raised for caller bugs, unreadable inputs and toolchain setup problems.
/// Expected pipeline outcomes (a slice that fails to compile, a crash) are
/// values, never exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view contents);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

/// Collapses every whitespace run to a single space and trims the ends.
std::string normalize_whitespace(std::string_view s);

/// True when `path` lies at or below `root` (both lexically normalized).
bool is_within(const fs::path& path, const fs::path& root);

/// `path` made relative to `root` when it lies below it, else unchanged.
std::string relative_to(const fs::path& path, const fs::path& root);

fs::path absolute_normal(const fs::path& path, const fs::path& base = {});

}  // namespace slicefuzz

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace crossgen {

// Ordered `key = value` entries; `#` starts a comment.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(const std::string& text, const std::string& origin = "config");
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& entries);

}  // namespace crossgen

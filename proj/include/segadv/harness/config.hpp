#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace segadv::harness {

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// UTF-8 "key=value" lines; '#' starts a comment, blank lines are skipped,
// whitespace around keys and values is trimmed. Malformed lines and repeated
// keys raise UsageError with the line number.
std::vector<ConfigEntry> parse_config(std::string_view text);
std::vector<ConfigEntry> load_config(const std::filesystem::path& path);

}  // namespace segadv::harness

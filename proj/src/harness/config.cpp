#include "segadv/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "segadv/error.hpp"

namespace segadv::harness {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<ConfigEntry> parse_config(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
      }
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
      if (!seen.insert(key).second) {
        throw UsageError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      out.push_back({key, std::string(trim(line.substr(eq + 1))), line_no});
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::vector<ConfigEntry> load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace segadv::harness

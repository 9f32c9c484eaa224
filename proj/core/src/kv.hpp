#pragma once

// Internal helpers for the flat `key = value` text format shared by run
// configs, synth specs, and patient label files.

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cardiolabel::detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// key = value lines; '#' starts a comment, blank lines are skipped. The tag
// prefixes error messages ("config", "labels", ...).
inline std::vector<std::pair<std::string, std::string>> parse_kv_pairs(const std::string& text,
                                                                       const std::string& tag) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(tag + ": line " + std::to_string(lineno) + " is not a key = value pair");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(tag + ": line " + std::to_string(lineno) + " has an empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline std::vector<std::string> split_commas(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace cardiolabel::detail

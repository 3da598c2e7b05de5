#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace emc::io {

/** Raised for malformed configuration input; the CLI maps it to exit code 1. */
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace cfg_detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace cfg_detail

/**
 * Sectioned key = value configuration, e.g.
 *
 *   [emc]
 *   paths = 10000   # comment
 *
 * Section and key names are case-sensitive. '#' and ';' start comments.
 * Values are kept verbatim (trimmed); typed accessors parse on demand.
 */
class Config {
 public:
  static Config parse_text(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto comment = line.find_first_of("#;");
      if (comment != std::string::npos) line = line.substr(0, comment);
      line = cfg_detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section header");
        section = cfg_detail::trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
        cfg.sections_[section];
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
      std::string key = cfg_detail::trim(line.substr(0, eq));
      std::string value = cfg_detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any [section]");
      cfg.sections_[section][key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key))
      throw ConfigError("missing config key [" + section + "] " + key);
    return s->second.at(key);
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return parse_double(section, key, get_string(section, key));
  }
  double get_double(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long long get_int(const std::string& section, const std::string& key) const {
    return parse_int(section, key, get_string(section, key));
  }
  long long get_int(const std::string& section, const std::string& key, long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }

  /** Comma-separated list of numbers. */
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(get_string(section, key), ','))
      out.push_back(parse_double(section, key, item));
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& section, const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& item : split(get_string(section, key), ',')) out.push_back(item);
    return out;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
  }

 private:
  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
      item = cfg_detail::trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static double parse_double(const std::string& section, const std::string& key,
                             const std::string& text) {
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
      throw ConfigError("config key [" + section + "] " + key + ": not a number: '" + text + "'");
    return v;
  }

  static long long parse_int(const std::string& section, const std::string& key,
                             const std::string& text) {
    char* end = nullptr;
    long long v = std::strtoll(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
      throw ConfigError("config key [" + section + "] " + key + ": not an integer: '" + text + "'");
    return v;
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace emc::io

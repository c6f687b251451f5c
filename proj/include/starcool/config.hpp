#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace starcool::config {

// Configuration error with the offending 1-based line number (0 when the
// problem is not tied to a line, e.g. an unreadable file).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Flat `key = value` document with `[section]` headers and `#` comments.
// Parsing is fail-fast: unknown sections or keys, duplicate keys, and
// malformed values are all errors that name the line.
class RunConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static RunConfig parse_string(const std::string& text) {
    RunConfig cfg;
    cfg.raw_ = text;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw ConfigError("unterminated section header", line_no);
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty()) throw ConfigError("empty section name", line_no);
        cfg.sections_touched_.insert(section);  // allows empty sections
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected `key = value`", line_no);
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key", line_no);
      if (section.empty())
        throw ConfigError("key `" + key + "` appears before any [section]", line_no);
      auto& sec = cfg.sections_[section];
      if (sec.count(key))
        throw ConfigError("duplicate key `" + key + "` in [" + section + "]", line_no);
      sec[key] = Entry{value, line_no};
    }
    return cfg;
  }

  static RunConfig parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def) const {
    const Entry* e = find(section, key);
    return e ? e->value : def;
  }

  double get_real(const std::string& section, const std::string& key, double def) const {
    const Entry* e = find(section, key);
    if (!e) return def;
    return parse_real(e->value, *e, section, key);
  }

  int get_int(const std::string& section, const std::string& key, int def) const {
    const Entry* e = find(section, key);
    if (!e) return def;
    try {
      std::size_t used = 0;
      const long v = std::stol(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("");
      return static_cast<int>(v);
    } catch (const std::exception&) {
      throw ConfigError("key `" + key + "` in [" + section + "] is not an integer", e->line);
    }
  }

  std::uint64_t get_seed(const std::string& section, const std::string& key,
                         std::uint64_t def) const {
    const Entry* e = find(section, key);
    if (!e) return def;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key `" + key + "` in [" + section + "] is not a seed", e->line);
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool def) const {
    const Entry* e = find(section, key);
    if (!e) return def;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    throw ConfigError("key `" + key + "` in [" + section + "] must be true or false", e->line);
  }

  std::vector<double> get_real_list(const std::string& section, const std::string& key,
                                    const std::vector<double>& def) const {
    const Entry* e = find(section, key);
    if (!e) return def;
    std::vector<double> out;
    std::istringstream ss(e->value);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(parse_real(trim(field), *e, section, key));
    if (out.empty())
      throw ConfigError("key `" + key + "` in [" + section + "] holds an empty list", e->line);
    return out;
  }

  std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                const std::vector<int>& def) const {
    const Entry* e = find(section, key);
    if (!e) return def;
    std::vector<int> out;
    std::istringstream ss(e->value);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const std::string f = trim(field);
      try {
        std::size_t used = 0;
        out.push_back(static_cast<int>(std::stol(f, &used)));
        if (used != f.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("key `" + key + "` in [" + section + "] is not an integer list", e->line);
      }
    }
    if (out.empty())
      throw ConfigError("key `" + key + "` in [" + section + "] holds an empty list", e->line);
    return out;
  }

  // Rejects any key outside the schema and any unknown section.
  void require_known(const std::map<std::string, std::set<std::string>>& schema) const {
    for (const auto& [section, entries] : sections_) {
      const auto s = schema.find(section);
      if (s == schema.end()) {
        throw ConfigError("unknown section [" + section + "]", first_line(entries));
      }
      for (const auto& [key, entry] : entries) {
        if (!s->second.count(key))
          throw ConfigError("unknown key `" + key + "` in [" + section + "]", entry.line);
      }
    }
    for (const auto& name : sections_touched_) {
      if (!schema.count(name)) throw ConfigError("unknown section [" + name + "]");
    }
  }

  // FNV-1a over the raw file bytes; recorded in output headers.
  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : raw_) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static double parse_real(const std::string& text, const Entry& e, const std::string& section,
                           const std::string& key) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key `" + key + "` in [" + section + "] is not a number", e.line);
    }
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  static int first_line(const std::map<std::string, Entry>& entries) {
    int line = 0;
    for (const auto& [key, entry] : entries) {
      if (line == 0 || entry.line < line) line = entry.line;
    }
    return line;
  }

  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::set<std::string> sections_touched_;
  std::string raw_;
};

}  // namespace starcool::config

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdq::cli {

/// Parse error with position information; the CLI maps this to exit 2.
struct ConfigParseError : std::runtime_error {
  ConfigParseError(const std::string& msg, int line, int col)
      : std::runtime_error(msg + " at line " + std::to_string(line) +
                           ", column " + std::to_string(col)),
        line(line),
        column(col) {}
  int line;
  int column;
};

/**
 * Flat key-value configuration with [section] headers, UTF-8, and `#`
 * comments. Keys flatten to "section.key". Getters record which keys were
 * consumed so unknown keys can be rejected after an experiment has pulled
 * everything it understands.
 */
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  int get_int(const std::string& key, int dflt) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& dflt) const;

  /// Throws ConfigParseError naming the first never-consumed key.
  void reject_unknown_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> key_lines_;
  mutable std::set<std::string> consumed_;
};

}  // namespace bdq::cli

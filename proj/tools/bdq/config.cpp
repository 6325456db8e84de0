#include "bdq/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace bdq::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigParseError("cannot open config file " + path.string(), 0, 0);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigParseError("malformed section header", lineno,
                               static_cast<int>(line.find('[')) + 1);
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigParseError("empty section name", lineno, 1);
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigParseError("expected key = value", lineno, 1);
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigParseError("empty key", lineno, 1);
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) {
      throw ConfigParseError("duplicate key '" + full + "'", lineno, 1);
    }
    cfg.values_[full] = value;
    cfg.key_lines_[full] = lineno;
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key,
                               const std::string& dflt) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

double Config::get_double(const std::string& key, double dflt) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigParseError("key '" + key + "' is not a number",
                           key_lines_.at(key), 1);
  }
}

int Config::get_int(const std::string& key, int dflt) const {
  const double v = get_double(key, static_cast<double>(dflt));
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw ConfigParseError("key '" + key + "' is not an integer",
                           key_lines_.at(key), 1);
  }
  return i;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t dflt) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigParseError("key '" + key + "' is not an unsigned integer",
                           key_lines_.at(key), 1);
  }
}

bool Config::get_bool(const std::string& key, bool dflt) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigParseError("key '" + key + "' is not a boolean",
                         key_lines_.at(key), 1);
}

std::vector<double> Config::get_double_list(
    const std::string& key, const std::vector<double>& dflt) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  std::vector<double> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(trim(item)));
    } catch (const std::exception&) {
      throw ConfigParseError("key '" + key + "' has a non-numeric entry",
                             key_lines_.at(key), 1);
    }
  }
  if (out.empty()) {
    throw ConfigParseError("key '" + key + "' is an empty list",
                           key_lines_.at(key), 1);
  }
  return out;
}

void Config::reject_unknown_keys() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) {
      throw ConfigParseError("unknown key '" + key + "'", key_lines_.at(key), 1);
    }
  }
}

}  // namespace bdq::cli

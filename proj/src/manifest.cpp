#include "ddsr/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddsr {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValues KeyValues::parse_string(const std::string& text) {
  KeyValues out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ShapeError("config line " + std::to_string(lineno) + ": expected key=value, got '" +
                       t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ShapeError("config line " + std::to_string(lineno) + ": empty key");
    out.kv_[key] = trim(t.substr(eq + 1));
  }
  return out;
}

KeyValues KeyValues::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str());
}

std::string KeyValues::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ShapeError("config: missing required key '" + key + "'");
  return it->second;
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ShapeError("config: key '" + key + "' is not an integer: '" + it->second + "'");
  }
}

std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ShapeError("config: key '" + key + "' is not an unsigned integer: '" + it->second +
                     "'");
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ShapeError("config: key '" + key + "' is not a number: '" + it->second + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ShapeError("config: key '" + key + "' is not a boolean: '" + v + "'");
}

void KeyValues::set_int(const std::string& key, std::int64_t value) {
  kv_[key] = std::to_string(value);
}

void KeyValues::set_uint(const std::string& key, std::uint64_t value) {
  kv_[key] = std::to_string(value);
}

void KeyValues::set_double(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  kv_[key] = buf;
}

void KeyValues::set_bool(const std::string& key, bool value) {
  kv_[key] = value ? "true" : "false";
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : kv_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValues::write_file(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write config file: " + path.string());
  os << serialize();
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace ddsr

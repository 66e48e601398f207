#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ddsr/error.hpp"

namespace ddsr {

// Line-oriented key=value files: dataset manifests, training configs and
// resolved-config snapshots. Keys serialize sorted so rewrites are
// byte-stable. '#' starts a comment.
class KeyValues {
 public:
  static KeyValues parse_string(const std::string& text);
  static KeyValues parse_file(const std::filesystem::path& path);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void set_int(const std::string& key, std::int64_t value);
  void set_uint(const std::string& key, std::uint64_t value);
  void set_double(const std::string& key, double value);
  void set_bool(const std::string& key, bool value);

  std::string serialize() const;
  void write_file(const std::filesystem::path& path) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace ddsr

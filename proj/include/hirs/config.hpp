#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hirs {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat key=value run configuration. Every key has a default; unknown keys are
/// rejected with the list of valid ones.
class RunConfig {
 public:
  RunConfig();

  static const std::map<std::string, std::string>& defaults();
  /// Reads `key = value` lines; '#' starts a comment.
  static RunConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted key=value lines of every key except output locations.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string fnv1a_hex(const std::string& text);

}  // namespace hirs

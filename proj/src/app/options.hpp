#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace bicmix::app {

// String-keyed option bag shared by the C API and the command line. Keys are
// the long flag names without dashes; list-valued keys hold several entries.
class Options {
 public:
  void set(const std::string& key, const std::string& value);
  void add(const std::string& key, const std::string& value);
  void erase(const std::string& key);
  bool has(const std::string& key) const;
  const std::map<std::string, std::vector<std::string>>& entries() const { return values_; }

  // Typed getters mark the key as consumed; UsageError on malformed values.
  std::string str(const std::string& key, const std::string& fallback) const;
  std::string required(const std::string& key) const;
  std::vector<std::string> list(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;

  // UsageError naming keys that no getter consumed.
  void reject_unused(const std::string& command) const;

 private:
  const std::string* single(const std::string& key) const;
  std::map<std::string, std::vector<std::string>> values_;
  mutable std::set<std::string> used_;
};

}  // namespace bicmix::app

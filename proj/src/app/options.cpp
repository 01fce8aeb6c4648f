#include "app/options.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>

#include "core/error.hpp"

namespace bicmix::app {

void Options::set(const std::string& key, const std::string& value) { values_[key] = {value}; }

void Options::add(const std::string& key, const std::string& value) {
  values_[key].push_back(value);
}

void Options::erase(const std::string& key) { values_.erase(key); }

bool Options::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string* Options::single(const std::string& key) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  if (it->second.size() != 1)
    throw UsageError("option '" + key + "' takes a single value, got " +
                     std::to_string(it->second.size()));
  return &it->second.front();
}

std::string Options::str(const std::string& key, const std::string& fallback) const {
  const auto* v = single(key);
  return v ? *v : fallback;
}

std::string Options::required(const std::string& key) const {
  const auto* v = single(key);
  if (!v || v->empty()) throw UsageError("option '" + key + "' is required");
  return *v;
}

std::vector<std::string> Options::list(const std::string& key) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? std::vector<std::string>{} : it->second;
}

double Options::real(const std::string& key, double fallback) const {
  const auto* v = single(key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (v->empty() || end != v->c_str() + v->size() || errno == ERANGE || !std::isfinite(d))
    throw UsageError("option '" + key + "' expects a finite number, got '" + *v + "'");
  return d;
}

std::uint64_t Options::u64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = single(key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const unsigned long long d = std::strtoull(v->c_str(), &end, 10);
  if (v->empty() || (*v)[0] == '-' || end != v->c_str() + v->size() || errno == ERANGE)
    throw UsageError("option '" + key + "' expects a nonnegative integer, got '" + *v + "'");
  return d;
}

std::size_t Options::count(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(u64(key, fallback));
}

bool Options::flag(const std::string& key, bool fallback) const {
  const auto* v = single(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw UsageError("option '" + key + "' expects true or false, got '" + *v + "'");
}

void Options::reject_unused(const std::string& command) const {
  for (const auto& [key, _] : values_)
    if (!used_.count(key))
      throw UsageError("option '" + key + "' is not recognized by '" + command + "'");
}

}  // namespace bicmix::app

#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>

namespace bicmix {

// Seeded random source. Distribution objects are built per draw so the
// engine state alone determines every future value.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();                               // (0, 1)
  double normal();                                // N(0, 1)
  double normal(double mean, double sd);
  double gamma(double shape, double rate);        // mean shape / rate
  double inverse_gamma(double shape, double scale);
  double beta(double a, double b);
  bool bernoulli(double p);
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);  // inclusive

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  void deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bicmix

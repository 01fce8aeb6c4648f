#include "random/rng.hpp"

#include <sstream>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "core/error.hpp"

namespace bicmix {

double Rng::uniform() {
  boost::random::uniform_01<double> u;
  double v;
  do {
    v = u(engine_);
  } while (v <= 0.0);
  return v;
}

double Rng::normal() {
  boost::random::normal_distribution<double> n(0.0, 1.0);
  return n(engine_);
}

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw NumericalError("gamma draw requires positive shape and rate");
  boost::random::gamma_distribution<double> g(shape, 1.0);
  return g(engine_) / rate;
}

double Rng::inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

double Rng::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw NumericalError("beta draw requires positive shapes");
  boost::random::beta_distribution<double> d(a, b);
  return d(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::uint64_t Rng::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  boost::random::uniform_int_distribution<std::uint64_t> d(lo, hi);
  return d(engine_);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::mt19937_64 e;
  is >> e;
  if (is.fail()) throw DataError("corrupt random engine state");
  engine_ = e;
}

}  // namespace bicmix

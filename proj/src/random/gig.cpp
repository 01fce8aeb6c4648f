#include "random/gig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "core/error.hpp"

namespace bicmix {

namespace {

// Below this concentration and for order >= 1 the 1/x term changes the density
// by a relative factor under omega^2, so the gamma limit is exact to rounding.
constexpr double kGammaLimitOmega = 1e-7;

// Standardized density: x^(l-1) exp(-w/2 (x + 1/x)).
double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0)
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

double rou_noshift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double rou_shift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) are the roots of y^3 + a y^2 + b y + c.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double fi = std::acos(std::clamp(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)), -1.0, 1.0));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;

  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Hat: constant on (0, x0], power law on (x0, 2/w], exponential beyond.
// Valid for 0 <= lambda < 1 and any w > 0.
double three_piece(double lambda, double omega, Rng& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double two_over_w = 2.0 / omega;
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;
  double k1 = 0.0;
  double k2 = 0.0;
  if (x0 >= two_over_w) {
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0
                  ? k1 * (std::log(2.0) - 2.0 * std::log(omega))
                  : k1 / lambda * (std::pow(two_over_w, lambda) - std::pow(x0, lambda));
    k2 = std::pow(two_over_w, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];
  const double tail_start = std::max(x0, two_over_w);
  for (;;) {
    double v = total * rng.uniform();
    double x;
    double hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      x = -two_over_w * std::log(std::exp(-omega / 2.0 * tail_start) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    if (!(x > 0.0) || !std::isfinite(x)) continue;
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

void GigParams::validate() const {
  const bool ok = std::isfinite(p_order) && std::isfinite(a_coef) && std::isfinite(b_coef) &&
                  a_coef > 0.0 && b_coef >= 0.0 && (b_coef > 0.0 || p_order > 0.0);
  if (!ok) {
    std::ostringstream os;
    os << "invalid GIG parameters (p=" << p_order << ", a=" << a_coef << ", b=" << b_coef << ")";
    throw NumericalError(os.str());
  }
}

double gig_log_kernel(const GigParams& g, double x) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (g.p_order - 1.0) * std::log(x) - 0.5 * (g.a_coef * x + g.b_coef / x);
}

double sample_gig(const GigParams& g, Rng& rng) {
  g.validate();
  if (g.b_coef == 0.0) return rng.gamma(g.p_order, g.a_coef / 2.0);

  const double lambda = std::abs(g.p_order);
  const double sa = std::sqrt(g.a_coef);
  const double sb = std::sqrt(g.b_coef);
  const double omega = std::max(sa * sb, 1e-300);
  const double alpha = sb / sa;  // alpha * X has the target law when X is standardized

  if (omega < kGammaLimitOmega && lambda >= 1.0) {
    if (g.p_order > 0.0) return rng.gamma(g.p_order, g.a_coef / 2.0);
    return 1.0 / rng.gamma(-g.p_order, g.b_coef / 2.0);
  }

  double x;
  if (lambda > 2.0 || omega > 3.0)
    x = rou_shift(lambda, omega, rng);
  else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2)
    x = rou_noshift(lambda, omega, rng);
  else
    x = three_piece(lambda, omega, rng);
  return g.p_order < 0.0 ? alpha / x : alpha * x;
}

}  // namespace bicmix

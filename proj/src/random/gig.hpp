#pragma once

#include "random/rng.hpp"

namespace bicmix {

// Density proportional to x^(p-1) exp(-(a x + b / x) / 2) on x > 0.
struct GigParams {
  double p_order = 1.0;
  double a_coef = 1.0;
  double b_coef = 1.0;

  // Requires a > 0, b >= 0, and p > 0 whenever b == 0.
  void validate() const;
};

// Exact rejection sampler (ratio-of-uniforms with or without mode shift, or a
// three-piece hat for small order and concentration).
double sample_gig(const GigParams& params, Rng& rng);

// log of the unnormalized density; -inf outside the support.
double gig_log_kernel(const GigParams& params, double x);

}  // namespace bicmix

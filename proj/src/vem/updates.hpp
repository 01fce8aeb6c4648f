#pragma once

#include <utility>
#include <vector>

#include "core/types.hpp"

namespace bicmix::vem {

// Prior precisions at or above this value are treated as a point mass at zero:
// the coordinate is dropped from the linear system and set to exactly 0.
inline constexpr double kPinnedPrecision = 0.5 / kFloor;

// z / theta + (1 - z) / phi per component; +inf marks a pinned coordinate.
VectorXd mixture_precision(const VectorXd& local_var, const VectorXd& global_var,
                           const VectorXd& indicator);

// Solves (<X X^T>/psi + diag(prec)) lambda = X y / psi over unpinned coordinates.
// x_second_moment is <X><X>^T + sum_j x_cov_j.
VectorXd update_loading_row(const VectorXd& y_row, const MatrixXd& x_mean,
                            const MatrixXd& x_second_moment, double psi_i,
                            const VectorXd& prior_precision);

// Mode of GIG(a - 1/2, 2 rate, square); square is lambda^2 or <x^2>.
double update_local_variance(double square, double rate, double shape);
inline double update_theta(double lambda, double delta, double a) {
  return update_local_variance(lambda * lambda, delta, a);
}

// Gamma-conditional rate updates take shape_offset = 1 for the mode (the
// default) or 0 for the conditional mean.

// max(FLOOR, (a + b - offset) / (local + global))
double update_local_rate(double local_var, double global_var, double a, double b,
                         double shape_offset = 1.0);
inline double update_delta(double theta, double phi, double a, double b,
                           double shape_offset = 1.0) {
  return update_local_rate(theta, phi, a, b, shape_offset);
}

// Column variance shared by the sparse rate prior and the dense variance.
// squares holds Lambda_ik^2 (or <x_kj^2>); its length is p (or n).
double update_global_variance(const VectorXd& squares, const VectorXd& local_rates, double tau,
                              double indicator, double b, double c);
double update_phi(const VectorXd& column, const VectorXd& deltas, double tau, double z, double b,
                  double c);

struct GammaMode {
  double value = kFloor;
  bool negative_numerator = false;
};

// max(FLOOR, numerator / rate) with a flag when numerator < 0.
GammaMode gamma_mode(double numerator, double rate);
inline GammaMode update_tau(double phi, double eta, double c, double d,
                            double shape_offset = 1.0) {
  return gamma_mode(c + d - shape_offset, phi + eta);
}
GammaMode update_eta(const VectorXd& tau, double gamma, double d, double e,
                     double shape_offset = 1.0);
inline GammaMode update_gamma(double eta, double nu, double e, double f,
                              double shape_offset = 1.0) {
  return gamma_mode(e + f - shape_offset, eta + nu);
}

struct ColumnHypers {
  VectorXd tau;
  double eta = 1.0;
  double gamma = 1.0;
  bool negative_numerator = false;
};
// tau from (phi, eta), then eta from the new tau, then gamma from the new eta.
ColumnHypers update_column_hypers(const VectorXd& phi, double eta, double gamma, double c,
                                  double d, double e, double f, double nu,
                                  double shape_offset = 1.0);

// Log evidence for the sparse and dense branches of one component.
struct IndicatorEvidence {
  double sparse = 0.0;
  double dense = 0.0;
};
IndicatorEvidence indicator_evidence(const VectorXd& squares, const VectorXd& local_var,
                                     const VectorXd& local_rate, double global_var, double ln_pi,
                                     double ln_one_minus_pi, double a, double b);

// 1 / (1 + exp(dense - sparse)); throws NumericalError naming a non-finite term.
double indicator_probability(const IndicatorEvidence& ev);

double expect_z(const VectorXd& column, const VectorXd& theta, const VectorXd& delta, double phi,
                double ln_pi, double ln_one_minus_pi, double a, double b);
double expect_o(const VectorXd& x_second_moments, const VectorXd& sigma, const VectorXd& rho,
                double omega, double ln_pi_x, double ln_one_minus_pi_x, double a_x, double b_x);

// Digamma expectations of ln(pi) and ln(1 - pi) under Beta(alpha + s, beta + K - s).
std::pair<double, double> expect_ln_pi(double z_sum, std::size_t k, double alpha, double beta);

struct FactorColumn {
  VectorXd mean;
  MatrixXd cov;
};
FactorColumn update_factor_column(const VectorXd& y_col, const MatrixXd& lambda,
                                  const VectorXd& psi, const VectorXd& prior_precision);
// Same solve with gram = L^T Psi^-1 L and rhs = L^T Psi^-1 y precomputed.
FactorColumn update_factor_column_prepared(const MatrixXd& gram, const VectorXd& rhs,
                                           const VectorXd& prior_precision);

// (RSS_i + 2) / (n + 2) per gene with RSS under <X X^T>.
VectorXd update_psi(const MatrixXd& y, const MatrixXd& lambda, const MatrixXd& x_mean,
                    const MatrixXd& x_second_moment);

// Removes components whose loading column or factor row is within prune_eps of
// zero. Returns the stable ids of removed components.
std::vector<std::size_t> prune_components(ModelState& state, double prune_eps);

// Keeps the listed component positions (ascending) and drops the rest.
void keep_components(ModelState& state, const std::vector<std::size_t>& keep);

// Per-component share of Tr(Lambda <X X^T> Lambda^T) ignoring cross terms.
VectorXd pve(const ModelState& state);

}  // namespace bicmix::vem

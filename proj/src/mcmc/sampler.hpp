#pragma once

#include <cstdint>
#include <vector>

#include "core/types.hpp"
#include "random/rng.hpp"

namespace bicmix::mcmc {

struct ChainConfig {
  std::size_t sweeps = 100;
  std::uint64_t seed = 0;
  std::size_t thin = 1;
  std::size_t record_from = 0;
  bool record = false;  // keep thinned states after record_from

  void validate() const;
};

// Draws the starting state: Ga(1,1) scales, Beta mixing weights, Bernoulli
// indicators, N(0,1) loadings and factors. x_cov entries are zero.
ModelState initialize_state(std::size_t p, std::size_t n, std::size_t k,
                            const Hyperparameters& hyper, Rng& rng);

// Gaussian draw with precision x x^T / psi + diag(1 / v) and mean P^-1 x y / psi.
VectorXd sample_loading_row(const VectorXd& y_row, const MatrixXd& x, double psi_i,
                            const VectorXd& v_diag, Rng& rng);
// Gaussian draw with precision L^T Psi^-1 L + diag(1 / w).
VectorXd sample_factor_column(const VectorXd& y_col, const MatrixXd& lambda, const VectorXd& psi,
                              const VectorXd& w_diag, Rng& rng);

// Scalar conditionals. Every draw is floored at FLOOR.
double sample_local_variance(double square, double rate, double shape, Rng& rng);  // theta, sigma
double sample_local_rate(double local_var, double global_var, double a, double b, Rng& rng);
double sample_sparse_global(double rate_sum, double upper, std::size_t len, double b, double c,
                            Rng& rng);
double sample_dense_global(double square_sum, double upper, std::size_t len, double c, Rng& rng);
double sample_column_rate(double global_var, double top, double c, double d, Rng& rng);  // tau, kappa
double sample_top(double upper_sum, std::size_t k, double global_rate, double d, double e,
                  Rng& rng);  // eta, chi
double sample_global_rate(double top, double nu, double e, double f, Rng& rng);  // gamma, varphi
double sample_mixing_weight(std::size_t n_sparse, std::size_t k, double alpha, double beta,
                            Rng& rng);
double sample_noise(double rss, std::size_t n, Rng& rng);

// Updates theta, delta and phi of component k given its hard indicator.
void sample_loading_hypers(ModelState& state, std::size_t k, const Hyperparameters& hyper,
                           Rng& rng);
void sample_factor_hypers(ModelState& state, std::size_t k, const Hyperparameters& hyper,
                          Rng& rng);

void sample_loading_block(ModelState& state, const MatrixXd& y, const Hyperparameters& hyper,
                          Rng& rng);
void sample_factor_block(ModelState& state, const MatrixXd& y, const Hyperparameters& hyper,
                         Rng& rng);
VectorXd sample_psi(const MatrixXd& y, const MatrixXd& lambda, const MatrixXd& x, Rng& rng);

// One full sweep: loading block, factor block, noise.
void sweep(ModelState& state, const MatrixXd& y, const Hyperparameters& hyper, Rng& rng);

struct ChainResult {
  ModelState state;
  std::vector<ModelState> samples;
};

ChainResult run_chain(const DataMatrix& data, std::size_t k, const Hyperparameters& hyper,
                      const ChainConfig& config);

}  // namespace bicmix::mcmc

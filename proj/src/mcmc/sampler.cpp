#include "mcmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/error.hpp"
#include "random/gig.hpp"
#include "vem/updates.hpp"

namespace bicmix::mcmc {

namespace {

double floored(double v) { return std::max(kFloor, v); }

VectorXd gaussian_draw(const MatrixXd& precision, const VectorXd& linear, Rng& rng,
                       const char* what) {
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << what << ": precision is not positive definite";
    throw NumericalError(os.str());
  }
  VectorXd eps(precision.rows());
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps(k) = rng.normal();
  VectorXd draw = llt.solve(linear);
  draw += llt.matrixU().solve(eps);
  return draw;
}

// Log odds of the indicator given the scales: only the Gaussian terms differ
// between the branches.
vem::IndicatorEvidence gaussian_evidence(const VectorXd& squares, const VectorXd& local_var,
                                         double global_var, double ln_pi, double ln_one_minus_pi) {
  vem::IndicatorEvidence ev{ln_pi, ln_one_minus_pi};
  for (Eigen::Index i = 0; i < squares.size(); ++i) {
    ev.sparse -= 0.5 * (std::log(local_var(i)) + squares(i) / local_var(i));
    ev.dense -= 0.5 * (std::log(global_var) + squares(i) / global_var);
  }
  return ev;
}

void set_mixing(double pi, double& ln_pi, double& ln_one_minus_pi) {
  ln_pi = std::log(pi);
  ln_one_minus_pi = std::log1p(-pi);
}

}  // namespace

void ChainConfig::validate() const {
  if (thin == 0) throw UsageError("thin must be positive");
  if (record && sweeps > 0 && record_from >= sweeps)
    throw UsageError("record_from must be smaller than the number of sweeps");
}

ModelState initialize_state(std::size_t p, std::size_t n, std::size_t k,
                            const Hyperparameters& hyper, Rng& rng) {
  if (k == 0) throw UsageError("at least one component is required");
  const auto P = static_cast<Eigen::Index>(p);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  ModelState s;
  s.loading.eta = floored(rng.gamma(1.0, 1.0));
  s.loading.gamma = floored(rng.gamma(1.0, 1.0));
  s.factor.chi = floored(rng.gamma(1.0, 1.0));
  s.factor.varphi = floored(rng.gamma(1.0, 1.0));
  const double pi = rng.beta(hyper.alpha, hyper.beta);
  const double pi_x = rng.beta(hyper.alpha_x, hyper.beta_x);
  set_mixing(pi, s.loading.ln_pi, s.loading.ln_one_minus_pi);
  set_mixing(pi_x, s.factor.ln_pi, s.factor.ln_one_minus_pi);
  s.noise.psi.resize(P);
  for (Eigen::Index i = 0; i < P; ++i) s.noise.psi(i) = floored(rng.gamma(1.0, 1.0));

  s.loading.lambda.resize(P, K);
  s.loading.theta.resize(P, K);
  s.loading.delta.resize(P, K);
  s.loading.phi.resize(K);
  s.loading.tau.resize(K);
  s.loading.z.resize(K);
  s.factor.x_mean.resize(K, N);
  s.factor.sigma.resize(K, N);
  s.factor.rho.resize(K, N);
  s.factor.omega.resize(K);
  s.factor.kappa.resize(K);
  s.factor.o.resize(K);
  for (Eigen::Index c = 0; c < K; ++c) {
    s.loading.z(c) = rng.bernoulli(pi) ? 1.0 : 0.0;
    s.factor.o(c) = rng.bernoulli(pi_x) ? 1.0 : 0.0;
    s.loading.phi(c) = floored(rng.gamma(1.0, 1.0));
    s.loading.tau(c) = floored(rng.gamma(1.0, 1.0));
    s.factor.omega(c) = floored(rng.gamma(1.0, 1.0));
    s.factor.kappa(c) = floored(rng.gamma(1.0, 1.0));
    for (Eigen::Index i = 0; i < P; ++i) {
      s.loading.lambda(i, c) = rng.normal();
      s.loading.theta(i, c) = floored(rng.gamma(1.0, 1.0));
      s.loading.delta(i, c) = floored(rng.gamma(1.0, 1.0));
    }
    for (Eigen::Index j = 0; j < N; ++j) {
      s.factor.x_mean(c, j) = rng.normal();
      s.factor.sigma(c, j) = floored(rng.gamma(1.0, 1.0));
      s.factor.rho(c, j) = floored(rng.gamma(1.0, 1.0));
    }
  }
  s.factor.x_cov.assign(n, MatrixXd::Zero(K, K));
  s.component_ids.resize(k);
  for (std::size_t c = 0; c < k; ++c) s.component_ids[c] = c;
  return s;
}

VectorXd sample_loading_row(const VectorXd& y_row, const MatrixXd& x, double psi_i,
                            const VectorXd& v_diag, Rng& rng) {
  MatrixXd precision = x * x.transpose() / psi_i;
  precision.diagonal() += v_diag.cwiseInverse();
  return gaussian_draw(precision, x * y_row / psi_i, rng, "loading row draw");
}

VectorXd sample_factor_column(const VectorXd& y_col, const MatrixXd& lambda, const VectorXd& psi,
                              const VectorXd& w_diag, Rng& rng) {
  const MatrixXd weighted = lambda.transpose() * psi.cwiseInverse().asDiagonal();
  MatrixXd precision = weighted * lambda;
  precision.diagonal() += w_diag.cwiseInverse();
  return gaussian_draw(precision, weighted * y_col, rng, "factor column draw");
}

double sample_local_variance(double square, double rate, double shape, Rng& rng) {
  GigParams g{shape - 0.5, 2.0 * rate, square};
  if (g.b_coef <= 0.0 && g.p_order <= 0.0) return kFloor;
  return floored(sample_gig(g, rng));
}

double sample_local_rate(double local_var, double global_var, double a, double b, Rng& rng) {
  return floored(rng.gamma(a + b, local_var + global_var));
}

double sample_sparse_global(double rate_sum, double upper, std::size_t len, double b, double c,
                            Rng& rng) {
  return floored(rng.gamma(static_cast<double>(len) * b + c, rate_sum + upper));
}

double sample_dense_global(double square_sum, double upper, std::size_t len, double c, Rng& rng) {
  GigParams g{c - 0.5 * static_cast<double>(len), 2.0 * upper, square_sum};
  if (g.b_coef <= 0.0 && g.p_order <= 0.0) return kFloor;
  return floored(sample_gig(g, rng));
}

double sample_column_rate(double global_var, double top, double c, double d, Rng& rng) {
  return floored(rng.gamma(c + d, global_var + top));
}

double sample_top(double upper_sum, std::size_t k, double global_rate, double d, double e,
                  Rng& rng) {
  return floored(rng.gamma(static_cast<double>(k) * d + e, global_rate + upper_sum));
}

double sample_global_rate(double top, double nu, double e, double f, Rng& rng) {
  return floored(rng.gamma(e + f, top + nu));
}

double sample_mixing_weight(std::size_t n_sparse, std::size_t k, double alpha, double beta,
                            Rng& rng) {
  return rng.beta(alpha + static_cast<double>(n_sparse), beta + static_cast<double>(k - n_sparse));
}

double sample_noise(double rss, std::size_t n, Rng& rng) {
  return floored(rng.inverse_gamma(0.5 * static_cast<double>(n) + 1.0, 0.5 * rss + 1.0));
}

// theta and delta exist for every component; when the indicator is dense they
// do not touch the loadings, so theta follows its gamma prior and delta and phi
// keep their rate-coupling terms.
void sample_loading_hypers(ModelState& s, std::size_t k, const Hyperparameters& h, Rng& rng) {
  auto& L = s.loading;
  const auto c = static_cast<Eigen::Index>(k);
  const auto p = static_cast<std::size_t>(L.lambda.rows());
  const bool sparse = L.z(c) > 0.5;
  if (sparse) {
    L.phi(c) = sample_sparse_global(L.delta.col(c).sum(), L.tau(c), p, h.b, h.c, rng);
  } else {
    L.phi(c) = sample_dense_global(L.lambda.col(c).squaredNorm(), L.tau(c) + L.delta.col(c).sum(),
                                   p, h.c + static_cast<double>(p) * h.b, rng);
  }
  for (Eigen::Index i = 0; i < L.lambda.rows(); ++i) {
    const double l = L.lambda(i, c);
    L.theta(i, c) = sparse ? sample_local_variance(l * l, L.delta(i, c), h.a, rng)
                           : floored(rng.gamma(h.a, L.delta(i, c)));
    L.delta(i, c) = sample_local_rate(L.theta(i, c), L.phi(c), h.a, h.b, rng);
  }
}

void sample_factor_hypers(ModelState& s, std::size_t k, const Hyperparameters& h, Rng& rng) {
  auto& F = s.factor;
  const auto c = static_cast<Eigen::Index>(k);
  const auto n = static_cast<std::size_t>(F.x_mean.cols());
  const bool sparse = F.o(c) > 0.5;
  if (sparse) {
    F.omega(c) = sample_sparse_global(F.rho.row(c).sum(), F.kappa(c), n, h.b_x, h.c_x, rng);
  } else {
    F.omega(c) = sample_dense_global(F.x_mean.row(c).squaredNorm(), F.kappa(c) + F.rho.row(c).sum(),
                                     n, h.c_x + static_cast<double>(n) * h.b_x, rng);
  }
  for (Eigen::Index j = 0; j < F.x_mean.cols(); ++j) {
    const double x = F.x_mean(c, j);
    F.sigma(c, j) = sparse ? sample_local_variance(x * x, F.rho(c, j), h.a_x, rng)
                           : floored(rng.gamma(h.a_x, F.rho(c, j)));
    F.rho(c, j) = sample_local_rate(F.sigma(c, j), F.omega(c), h.a_x, h.b_x, rng);
  }
}

void sample_loading_block(ModelState& s, const MatrixXd& y, const Hyperparameters& h, Rng& rng) {
  auto& L = s.loading;
  const auto K = L.lambda.cols();
  const std::size_t k = s.components();
  VectorXd v(K);
  for (Eigen::Index i = 0; i < L.lambda.rows(); ++i) {
    for (Eigen::Index c = 0; c < K; ++c) v(c) = L.z(c) > 0.5 ? L.theta(i, c) : L.phi(c);
    L.lambda.row(i) =
        sample_loading_row(y.row(i).transpose(), s.factor.x_mean, s.noise.psi(i), v, rng)
            .transpose();
  }
  for (std::size_t c = 0; c < k; ++c) sample_loading_hypers(s, c, h, rng);
  std::size_t n_sparse = 0;
  for (Eigen::Index c = 0; c < K; ++c) {
    L.tau(c) = sample_column_rate(L.phi(c), L.eta, h.c, h.d, rng);
    const auto ev = gaussian_evidence(L.lambda.col(c).array().square().matrix(), L.theta.col(c),
                                      L.phi(c), L.ln_pi, L.ln_one_minus_pi);
    L.z(c) = rng.bernoulli(vem::indicator_probability(ev)) ? 1.0 : 0.0;
    n_sparse += L.z(c) > 0.5 ? 1 : 0;
  }
  L.eta = sample_top(L.tau.sum(), k, L.gamma, h.d, h.e, rng);
  L.gamma = sample_global_rate(L.eta, h.nu, h.e, h.f, rng);
  set_mixing(sample_mixing_weight(n_sparse, k, h.alpha, h.beta, rng), L.ln_pi, L.ln_one_minus_pi);
}

void sample_factor_block(ModelState& s, const MatrixXd& y, const Hyperparameters& h, Rng& rng) {
  auto& F = s.factor;
  const auto K = F.x_mean.rows();
  const std::size_t k = s.components();
  VectorXd w(K);
  for (Eigen::Index j = 0; j < F.x_mean.cols(); ++j) {
    for (Eigen::Index c = 0; c < K; ++c) w(c) = F.o(c) > 0.5 ? F.sigma(c, j) : F.omega(c);
    F.x_mean.col(j) = sample_factor_column(y.col(j), s.loading.lambda, s.noise.psi, w, rng);
  }
  for (std::size_t c = 0; c < k; ++c) sample_factor_hypers(s, c, h, rng);
  std::size_t n_sparse = 0;
  for (Eigen::Index c = 0; c < K; ++c) {
    F.kappa(c) = sample_column_rate(F.omega(c), F.chi, h.c_x, h.d_x, rng);
    const auto ev = gaussian_evidence(F.x_mean.row(c).array().square().matrix().transpose(),
                                      F.sigma.row(c).transpose(), F.omega(c), F.ln_pi,
                                      F.ln_one_minus_pi);
    F.o(c) = rng.bernoulli(vem::indicator_probability(ev)) ? 1.0 : 0.0;
    n_sparse += F.o(c) > 0.5 ? 1 : 0;
  }
  F.chi = sample_top(F.kappa.sum(), k, F.varphi, h.d_x, h.e_x, rng);
  F.varphi = sample_global_rate(F.chi, h.xi, h.e_x, h.f_x, rng);
  set_mixing(sample_mixing_weight(n_sparse, k, h.alpha_x, h.beta_x, rng), F.ln_pi,
             F.ln_one_minus_pi);
}

VectorXd sample_psi(const MatrixXd& y, const MatrixXd& lambda, const MatrixXd& x, Rng& rng) {
  const MatrixXd resid = y - lambda * x;
  VectorXd psi(y.rows());
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    psi(i) = sample_noise(resid.row(i).squaredNorm(), static_cast<std::size_t>(y.cols()), rng);
  return psi;
}

void sweep(ModelState& s, const MatrixXd& y, const Hyperparameters& h, Rng& rng) {
  sample_loading_block(s, y, h, rng);
  sample_factor_block(s, y, h, rng);
  s.noise.psi = sample_psi(y, s.loading.lambda, s.factor.x_mean, rng);
}

ChainResult run_chain(const DataMatrix& data, std::size_t k, const Hyperparameters& hyper,
                      const ChainConfig& config) {
  data.validate();
  hyper.validate();
  config.validate();
  Rng rng(config.seed);
  ChainResult out;
  out.state = initialize_state(data.genes(), data.samples(), k, hyper, rng);
  for (std::size_t t = 0; t < config.sweeps; ++t) {
    sweep(out.state, data.values, hyper, rng);
    if (config.record && t >= config.record_from && (t - config.record_from) % config.thin == 0)
      out.samples.push_back(out.state);
  }
  return out;
}

}  // namespace bicmix::mcmc

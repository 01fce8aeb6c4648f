#include "vem/fit.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <sstream>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "mcmc/sampler.hpp"
#include "vem/updates.hpp"

namespace bicmix::vem {

void FitConfig::validate() const {
  if (k_init < 1) throw UsageError("k_init must be at least 1");
  if (max_iterations < 1) throw UsageError("max_iterations must be at least 1");
  if (!(prune_eps >= 0.0)) throw UsageError("prune_eps must be nonnegative");
  if (!(converge_tol >= 0.0)) throw UsageError("converge_tol must be nonnegative");
  if (!(support_eps >= 0.0)) throw UsageError("support_eps must be nonnegative");
  if (!(classification_threshold > 0.5 && classification_threshold <= 1.0))
    throw UsageError("classification_threshold must lie in (0.5, 1]");
}

namespace {

void loading_block(ModelState& s, const MatrixXd& y, const Hyperparameters& h, double off,
                   bool& warn) {
  auto& L = s.loading;
  const auto p = L.lambda.rows();
  const auto K = L.lambda.cols();
  const MatrixXd xx = s.x_second_moment();

  parallel_for(static_cast<std::size_t>(p), [&](std::size_t r) {
    const auto i = static_cast<Eigen::Index>(r);
    const VectorXd prec = mixture_precision(L.theta.row(i).transpose(), L.phi, L.z);
    L.lambda.row(i) =
        update_loading_row(y.row(i).transpose(), s.factor.x_mean, xx, s.noise.psi(i), prec)
            .transpose();
    for (Eigen::Index c = 0; c < K; ++c) {
      L.theta(i, c) = update_theta(L.lambda(i, c), L.delta(i, c), h.a);
      L.delta(i, c) = update_delta(L.theta(i, c), L.phi(c), h.a, h.b, off);
    }
  });

  for (Eigen::Index c = 0; c < K; ++c) {
    L.phi(c) = update_phi(L.lambda.col(c), L.delta.col(c), L.tau(c), L.z(c), h.b, h.c);
    const auto t = update_tau(L.phi(c), L.eta, h.c, h.d, off);
    L.tau(c) = t.value;
    warn |= t.negative_numerator;
    L.z(c) = expect_z(L.lambda.col(c), L.theta.col(c), L.delta.col(c), L.phi(c), L.ln_pi,
                      L.ln_one_minus_pi, h.a, h.b);
  }
  const auto en = update_eta(L.tau, L.gamma, h.d, h.e, off);
  L.eta = en.value;
  const auto gn = update_gamma(L.eta, h.nu, h.e, h.f, off);
  L.gamma = gn.value;
  warn |= en.negative_numerator || gn.negative_numerator;
  std::tie(L.ln_pi, L.ln_one_minus_pi) =
      expect_ln_pi(L.z.sum(), static_cast<std::size_t>(K), h.alpha, h.beta);
}

void factor_block(ModelState& s, const MatrixXd& y, const Hyperparameters& h, double off,
                  bool& warn) {
  auto& F = s.factor;
  const auto n = F.x_mean.cols();
  const auto K = F.x_mean.rows();
  const MatrixXd& lambda = s.loading.lambda;
  const MatrixXd weighted = lambda.transpose() * s.noise.psi.cwiseInverse().asDiagonal();
  const MatrixXd gram = weighted * lambda;
  const MatrixXd rhs = weighted * y;

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t col) {
    const auto j = static_cast<Eigen::Index>(col);
    const VectorXd prec = mixture_precision(F.sigma.col(j), F.omega, F.o);
    FactorColumn fc = update_factor_column_prepared(gram, rhs.col(j), prec);
    F.x_mean.col(j) = fc.mean;
    F.x_cov[col] = std::move(fc.cov);
    for (Eigen::Index c = 0; c < K; ++c) {
      const double x2 = F.x_mean(c, j) * F.x_mean(c, j) + F.x_cov[col](c, c);
      F.sigma(c, j) = update_local_variance(x2, F.rho(c, j), h.a_x);
      F.rho(c, j) = update_local_rate(F.sigma(c, j), F.omega(c), h.a_x, h.b_x, off);
    }
  });

  for (Eigen::Index c = 0; c < K; ++c) {
    VectorXd x2(n);
    for (Eigen::Index j = 0; j < n; ++j)
      x2(j) = F.x_mean(c, j) * F.x_mean(c, j) + F.x_cov[static_cast<std::size_t>(j)](c, c);
    F.omega(c) =
        update_global_variance(x2, F.rho.row(c).transpose(), F.kappa(c), F.o(c), h.b_x, h.c_x);
    const auto t = update_tau(F.omega(c), F.chi, h.c_x, h.d_x, off);
    F.kappa(c) = t.value;
    warn |= t.negative_numerator;
    F.o(c) = expect_o(x2, F.sigma.row(c).transpose(), F.rho.row(c).transpose(), F.omega(c),
                      F.ln_pi, F.ln_one_minus_pi, h.a_x, h.b_x);
  }
  const auto cn = update_eta(F.kappa, F.varphi, h.d_x, h.e_x, off);
  F.chi = cn.value;
  const auto vn = update_gamma(F.chi, h.xi, h.e_x, h.f_x, off);
  F.varphi = vn.value;
  warn |= cn.negative_numerator || vn.negative_numerator;
  std::tie(F.ln_pi, F.ln_one_minus_pi) =
      expect_ln_pi(F.o.sum(), static_cast<std::size_t>(K), h.alpha_x, h.beta_x);
}

}  // namespace

bool vem_sweep(ModelState& state, const MatrixXd& y, const Hyperparameters& hyper,
               RateUpdate rate_update) {
  const double off = rate_update == RateUpdate::Mode ? 1.0 : 0.0;
  bool warn = false;
  loading_block(state, y, hyper, off, warn);
  factor_block(state, y, hyper, off, warn);
  state.noise.psi =
      update_psi(y, state.loading.lambda, state.factor.x_mean, state.x_second_moment());
  return warn;
}

IterationTrace trace_entry(const ModelState& s, const MatrixXd& y, std::size_t iteration,
                           double support_eps) {
  IterationTrace t;
  t.iteration = iteration;
  t.component_ids = s.component_ids;
  t.active = s.components();
  for (std::size_t c = 0; c < s.components(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    t.n_genes.push_back(support(VectorXd(s.loading.lambda.col(ci)), support_eps).size());
    t.n_samples.push_back(support(VectorXd(s.factor.x_mean.row(ci).transpose()), support_eps).size());
  }
  t.residual_norm = (y - s.loading.lambda * s.factor.x_mean).norm();
  return t;
}

FitProgress start_fit(const DataMatrix& data, const Hyperparameters& hyper,
                      const FitConfig& config) {
  data.validate();
  hyper.validate();
  config.validate();
  FitProgress progress;
  progress.rng = Rng(config.seed);
  progress.state = mcmc::initialize_state(data.genes(), data.samples(), config.k_init, hyper,
                                          progress.rng);
  for (std::size_t t = 0; t < config.warm_start_iterations; ++t) {
    try {
      mcmc::sweep(progress.state, data.values, hyper, progress.rng);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "warm-start sweep " << (t + 1) << ": " << e.what();
      throw NumericalError(os.str(), e.condition());
    }
  }
  return progress;
}

void continue_fit(FitProgress& progress, const DataMatrix& data, const Hyperparameters& hyper,
                  const FitConfig& config, std::size_t until,
                  const std::function<void(const FitProgress&)>& on_sweep) {
  while (progress.iteration < until) {
    const std::size_t t = progress.iteration + 1;
    try {
      progress.hyper_warning |= vem_sweep(progress.state, data.values, hyper, config.rate_update);
      prune_components(progress.state, config.prune_eps);
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "iteration " << t << ": " << e.what();
      throw NumericalError(os.str(), e.condition());
    }
    IterationTrace entry = trace_entry(progress.state, data.values, t, config.support_eps);
    if (!progress.trace.empty() && !progress.converged_at) {
      const double prev = progress.trace.back().residual_norm;
      const double scale = std::max(prev, 1e-300);
      if (std::abs(entry.residual_norm - prev) / scale < config.converge_tol)
        progress.converged_at = t;
    }
    progress.trace.push_back(std::move(entry));
    progress.iteration = t;
    if (on_sweep) on_sweep(progress);
  }
}

FitProgress fit(const DataMatrix& data, const Hyperparameters& hyper, const FitConfig& config) {
  FitProgress progress = start_fit(data, hyper, config);
  continue_fit(progress, data, hyper, config, config.max_iterations);
  return progress;
}

}  // namespace bicmix::vem

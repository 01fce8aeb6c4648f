#include "vem/updates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "core/error.hpp"

namespace bicmix::vem {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_normal_density(double square, double var) {
  return -0.5 * (kLogTwoPi + std::log(var)) - square / (2.0 * var);
}

double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

bool pinned(double precision) { return !(precision < kPinnedPrecision); }

std::vector<Eigen::Index> active_indices(const VectorXd& precision) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < precision.size(); ++k)
    if (!pinned(precision(k))) idx.push_back(k);
  return idx;
}

// Solves (gram + diag(prec)) v = rhs on the unpinned coordinates.
Eigen::LLT<MatrixXd> factor_system(const MatrixXd& gram, const VectorXd& precision,
                                   const std::vector<Eigen::Index>& idx, const char* what) {
  const auto m = static_cast<Eigen::Index>(idx.size());
  MatrixXd a(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) a(r, c) = gram(idx[r], idx[c]);
    a(r, r) += precision(idx[r]);
  }
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << what << ": system is not positive definite";
    throw NumericalError(os.str(), 0.0);
  }
  const double rcond = m > 0 ? llt.rcond() : 1.0;
  if (!(rcond > 0.0)) {
    std::ostringstream os;
    os << what << ": system is numerically singular (reciprocal condition " << rcond << ")";
    throw NumericalError(os.str(), rcond);
  }
  return llt;
}

}  // namespace

VectorXd mixture_precision(const VectorXd& local_var, const VectorXd& global_var,
                           const VectorXd& indicator) {
  VectorXd prec(indicator.size());
  for (Eigen::Index k = 0; k < indicator.size(); ++k) {
    const double z = indicator(k);
    double v = 0.0;
    if (z > 0.0) v += z / local_var(k);
    if (z < 1.0) v += (1.0 - z) / global_var(k);
    prec(k) = pinned(v) ? std::numeric_limits<double>::infinity() : v;
  }
  return prec;
}

VectorXd update_loading_row(const VectorXd& y_row, const MatrixXd& x_mean,
                            const MatrixXd& x_second_moment, double psi_i,
                            const VectorXd& prior_precision) {
  const auto k = x_mean.rows();
  VectorXd out = VectorXd::Zero(k);
  const auto idx = active_indices(prior_precision);
  if (idx.empty()) return out;
  const MatrixXd gram = x_second_moment / psi_i;
  const VectorXd xy = x_mean * y_row / psi_i;
  auto llt = factor_system(gram, prior_precision, idx, "loading row update");
  VectorXd rhs(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) rhs(r) = xy(idx[r]);
  const VectorXd sol = llt.solve(rhs);
  for (std::size_t r = 0; r < idx.size(); ++r) out(idx[r]) = sol(r);
  return out;
}

double update_local_variance(double square, double rate, double shape) {
  const double lin = 2.0 * shape - 3.0;
  const double disc = std::sqrt(lin * lin + 8.0 * square * rate);
  const double v = lin < 0.0 ? 2.0 * square / (disc - lin) : (lin + disc) / (4.0 * rate);
  return std::max(kFloor, v);
}

double update_local_rate(double local_var, double global_var, double a, double b,
                         double shape_offset) {
  return std::max(kFloor, (a + b - shape_offset) / (local_var + global_var));
}

double update_global_variance(const VectorXd& squares, const VectorXd& local_rates, double tau,
                              double indicator, double b, double c) {
  const double len = static_cast<double>(squares.size());
  const double h = len * b * indicator + c - 1.0 - 0.5 * len * (1.0 - indicator);
  const double m = 2.0 * (indicator * local_rates.sum() + tau);
  const double t = (1.0 - indicator) * squares.sum();
  const double disc = std::sqrt(h * h + m * t);
  const double v = h < 0.0 ? t / (disc - h) : (h + disc) / m;
  return std::max(kFloor, v);
}

double update_phi(const VectorXd& column, const VectorXd& deltas, double tau, double z, double b,
                  double c) {
  return update_global_variance(column.array().square().matrix(), deltas, tau, z, b, c);
}

GammaMode gamma_mode(double numerator, double rate) {
  GammaMode g;
  g.negative_numerator = numerator < 0.0;
  g.value = std::max(kFloor, numerator / rate);
  return g;
}

GammaMode update_eta(const VectorXd& tau, double gamma, double d, double e,
                     double shape_offset) {
  return gamma_mode(static_cast<double>(tau.size()) * d + e - shape_offset, gamma + tau.sum());
}

ColumnHypers update_column_hypers(const VectorXd& phi, double eta, double gamma, double c,
                                  double d, double e, double f, double nu,
                                  double shape_offset) {
  ColumnHypers out;
  out.tau.resize(phi.size());
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    const auto t = update_tau(phi(k), eta, c, d, shape_offset);
    out.tau(k) = t.value;
    out.negative_numerator |= t.negative_numerator;
  }
  const auto en = update_eta(out.tau, gamma, d, e, shape_offset);
  const auto gn = update_gamma(en.value, nu, e, f, shape_offset);
  out.eta = en.value;
  out.gamma = gn.value;
  out.negative_numerator |= en.negative_numerator || gn.negative_numerator;
  return out;
}

IndicatorEvidence indicator_evidence(const VectorXd& squares, const VectorXd& local_var,
                                     const VectorXd& local_rate, double global_var, double ln_pi,
                                     double ln_one_minus_pi, double a, double b) {
  IndicatorEvidence ev;
  ev.sparse = ln_pi;
  ev.dense = ln_one_minus_pi;
  for (Eigen::Index i = 0; i < squares.size(); ++i) {
    const double s = log_normal_density(squares(i), local_var(i)) +
                     log_gamma_density(local_var(i), a, local_rate(i)) +
                     log_gamma_density(local_rate(i), b, global_var);
    const double d = log_normal_density(squares(i), global_var);
    if (!std::isfinite(s) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "non-finite log density at index " << i << " (square " << squares(i)
         << ", local variance " << local_var(i) << ", local rate " << local_rate(i)
         << ", global variance " << global_var << ")";
      throw NumericalError(os.str());
    }
    ev.sparse += s;
    ev.dense += d;
  }
  return ev;
}

double indicator_probability(const IndicatorEvidence& ev) {
  // One branch may be impossible (log prior weight of -inf), never both.
  const bool bad = std::isnan(ev.sparse) || std::isnan(ev.dense) || ev.sparse == kInf ||
                   ev.dense == kInf || (ev.sparse == -kInf && ev.dense == -kInf);
  if (bad) throw NumericalError("non-finite indicator evidence");
  const double diff = ev.dense - ev.sparse;
  if (diff > 0.0) {
    const double e = std::exp(-diff);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(diff));
}

double expect_z(const VectorXd& column, const VectorXd& theta, const VectorXd& delta, double phi,
                double ln_pi, double ln_one_minus_pi, double a, double b) {
  return indicator_probability(indicator_evidence(column.array().square().matrix(), theta, delta,
                                                  phi, ln_pi, ln_one_minus_pi, a, b));
}

double expect_o(const VectorXd& x_second_moments, const VectorXd& sigma, const VectorXd& rho,
                double omega, double ln_pi_x, double ln_one_minus_pi_x, double a_x, double b_x) {
  return indicator_probability(indicator_evidence(x_second_moments, sigma, rho, omega, ln_pi_x,
                                                  ln_one_minus_pi_x, a_x, b_x));
}

std::pair<double, double> expect_ln_pi(double z_sum, std::size_t k, double alpha, double beta) {
  using boost::math::digamma;
  const double kk = static_cast<double>(k);
  const double total = digamma(kk + alpha + beta);
  return {digamma(z_sum + alpha) - total, digamma(kk - z_sum + beta) - total};
}

FactorColumn update_factor_column_prepared(const MatrixXd& gram, const VectorXd& rhs_full,
                                           const VectorXd& prior_precision) {
  const auto k = gram.rows();
  FactorColumn out{VectorXd::Zero(k), MatrixXd::Zero(k, k)};
  const auto idx = active_indices(prior_precision);
  if (idx.empty()) return out;
  auto llt = factor_system(gram, prior_precision, idx, "factor column update");
  const auto m = static_cast<Eigen::Index>(idx.size());
  VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) rhs(r) = rhs_full(idx[r]);
  const VectorXd mean = llt.solve(rhs);
  MatrixXd cov = llt.solve(MatrixXd::Identity(m, m));
  cov = (0.5 * (cov + cov.transpose())).eval();
  for (Eigen::Index r = 0; r < m; ++r) {
    out.mean(idx[r]) = mean(r);
    for (Eigen::Index c = 0; c < m; ++c) out.cov(idx[r], idx[c]) = cov(r, c);
  }
  return out;
}

FactorColumn update_factor_column(const VectorXd& y_col, const MatrixXd& lambda,
                                  const VectorXd& psi, const VectorXd& prior_precision) {
  const MatrixXd weighted = lambda.transpose() * psi.cwiseInverse().asDiagonal();
  const MatrixXd gram = weighted * lambda;
  return update_factor_column_prepared(gram, weighted * y_col, prior_precision);
}

VectorXd update_psi(const MatrixXd& y, const MatrixXd& lambda, const MatrixXd& x_mean,
                    const MatrixXd& x_second_moment) {
  const double n = static_cast<double>(y.cols());
  const MatrixXd yx = y * x_mean.transpose();  // p x K
  VectorXd psi(y.rows());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const VectorXd l = lambda.row(i).transpose();
    const double rss = y.row(i).squaredNorm() - 2.0 * yx.row(i).dot(l) + l.dot(x_second_moment * l);
    psi(i) = std::max(kFloor, (rss + 2.0) / (n + 2.0));
  }
  return psi;
}

void keep_components(ModelState& s, const std::vector<std::size_t>& keep) {
  std::vector<Eigen::Index> idx(keep.begin(), keep.end());
  auto cols = [&](const MatrixXd& a) { return MatrixXd(a(Eigen::all, idx)); };
  auto rows = [&](const MatrixXd& a) { return MatrixXd(a(idx, Eigen::all)); };
  auto elems = [&](const VectorXd& a) { return VectorXd(a(idx)); };
  s.loading.lambda = cols(s.loading.lambda);
  s.loading.theta = cols(s.loading.theta);
  s.loading.delta = cols(s.loading.delta);
  s.loading.phi = elems(s.loading.phi);
  s.loading.tau = elems(s.loading.tau);
  s.loading.z = elems(s.loading.z);
  s.factor.x_mean = rows(s.factor.x_mean);
  s.factor.sigma = rows(s.factor.sigma);
  s.factor.rho = rows(s.factor.rho);
  s.factor.omega = elems(s.factor.omega);
  s.factor.kappa = elems(s.factor.kappa);
  s.factor.o = elems(s.factor.o);
  for (auto& cov : s.factor.x_cov) cov = MatrixXd(cov(idx, idx));
  std::vector<std::size_t> ids;
  ids.reserve(keep.size());
  for (auto k : keep) ids.push_back(s.component_ids[k]);
  s.component_ids = std::move(ids);
}

std::vector<std::size_t> prune_components(ModelState& s, double prune_eps) {
  std::vector<std::size_t> keep;
  std::vector<std::size_t> removed;
  const auto k = s.components();
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    const double lmax = s.loading.lambda.rows() ? s.loading.lambda.col(ci).cwiseAbs().maxCoeff() : 0.0;
    const double xmax = s.factor.x_mean.cols() ? s.factor.x_mean.row(ci).cwiseAbs().maxCoeff() : 0.0;
    if (lmax <= prune_eps || xmax <= prune_eps)
      removed.push_back(s.component_ids[c]);
    else
      keep.push_back(c);
  }
  if (!removed.empty()) keep_components(s, keep);
  return removed;
}

VectorXd pve(const ModelState& s) {
  const auto k = static_cast<Eigen::Index>(s.components());
  const MatrixXd cov_sum = s.x_cov_sum();
  VectorXd num(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double xx = s.factor.x_mean.row(c).squaredNorm() + cov_sum(c, c);
    num(c) = s.loading.lambda.col(c).squaredNorm() * xx;
  }
  const double total = num.sum();
  if (!(total > 0.0)) throw NumericalError("variance explained is undefined for an all-zero model");
  return num / total;
}

}  // namespace bicmix::vem

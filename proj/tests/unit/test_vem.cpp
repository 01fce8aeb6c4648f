#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "core/error.hpp"
#include "mcmc/sampler.hpp"
#include "support/oracles.hpp"
#include "vem/fit.hpp"
#include "vem/updates.hpp"

using namespace bicmix;
using namespace bicmix::vem;

namespace {

std::mt19937_64& gen() {
  static std::mt19937_64 g(2718);
  return g;
}
double unif(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen()); }
double log_unif(double lo, double hi) { return std::exp(unif(std::log(lo), std::log(hi))); }
double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen()); }

// Direct non-log ratio of the sparse and dense branch densities.
double direct_indicator(const VectorXd& values, const VectorXd& lv, const VectorXd& lr, double gv,
                        double pi, double a, double b) {
  double sparse = pi, dense = 1.0 - pi;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    boost::math::normal_distribution<double> ns(0.0, std::sqrt(lv(i))), nd(0.0, std::sqrt(gv));
    boost::math::gamma_distribution<double> ga(a, 1.0 / lr(i)), gb(b, 1.0 / gv);
    sparse *= boost::math::pdf(ns, values(i)) * boost::math::pdf(ga, lv(i)) * boost::math::pdf(gb, lr(i));
    dense *= boost::math::pdf(nd, values(i));
  }
  return sparse / (sparse + dense);
}

ModelState small_state(std::size_t p, std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  return mcmc::initialize_state(p, n, k, Hyperparameters{}, rng);
}

}  // namespace

TEST_CASE("loading row examples") {
  const VectorXd prec1 = VectorXd::Ones(1);
  MatrixXd x = MatrixXd::Zero(1, 2);
  CHECK(update_loading_row(VectorXd{{2.0, 2.0}}, x, x * x.transpose(), 1.0, prec1)(0) == 0.0);
  x << 1.0, 1.0;
  CHECK(update_loading_row(VectorXd{{2.0, 2.0}}, x, x * x.transpose(), 1.0, prec1)(0) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  // brute-force 1-D maximization of the row objective
  const double brute = oracle::golden_max(
      [](double l) { return -0.5 * (2 * (2 - l) * (2 - l)) - 0.5 * l * l; }, -10, 10);
  CHECK(brute == doctest::Approx(4.0 / 3.0).epsilon(1e-8));
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  const VectorXd two = update_loading_row(VectorXd{{1.0, 2.0}}, eye, eye, 1.0, VectorXd::Ones(2));
  const VectorXd solved = (eye + eye).fullPivLu().solve(VectorXd{{1.0, 2.0}});
  CHECK(two(0) == doctest::Approx(solved(0)).epsilon(1e-14));
  CHECK(two(1) == doctest::Approx(solved(1)).epsilon(1e-14));
  CHECK(two(0) == doctest::Approx(0.5));
  CHECK(two(1) == doctest::Approx(1.0));
}

TEST_CASE("pinned coordinates are exactly zero") {
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  VectorXd prec{{1.0, std::numeric_limits<double>::infinity()}};
  const VectorXd r = update_loading_row(VectorXd{{1.0, 2.0}}, eye, eye, 1.0, prec);
  CHECK(r(1) == 0.0);
  CHECK(r(0) == doctest::Approx(0.5));
  const VectorXd mp = mixture_precision(VectorXd{{kFloor, 1.0}}, VectorXd{{1.0, 1.0}},
                                        VectorXd{{1.0, 1.0}});
  CHECK(std::isinf(mp(0)));
  CHECK(mp(1) == doctest::Approx(1.0));
}

TEST_CASE("theta examples") {
  CHECK(update_theta(0.0, 1.0, 0.5) == kFloor);
  CHECK(update_theta(2.0, 1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  const double numeric = oracle::golden_max_positive([](double t) {
    return -0.5 * std::log(t) - 4.0 / (2 * t) + (0.5 - 1) * std::log(t) - t;
  });
  CHECK(numeric == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(update_theta(2.0, 1e-12, 0.5) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("delta examples") {
  CHECK(update_delta(1.0, 1.0, 2.0, 1.0) == doctest::Approx(1.0));
  CHECK(update_delta(0.5, 0.5, 0.5, 0.5) == kFloor);
  CHECK(update_delta(0.5, 0.5, 1.5, 1.0) == doctest::Approx(1.5).epsilon(1e-14));
  const double numeric =
      oracle::golden_max_positive([](double d) { return 1.5 * std::log(d) - 1.0 * d; });
  CHECK(numeric == doctest::Approx(1.5).epsilon(1e-8));
}

TEST_CASE("phi examples") {
  // dense, p = 2, c = 0.5, tau = 1, column (1, 1): tau phi^2 + (p/2 + 1 - c) phi - T/2 = 0
  const double root = oracle::largest_root(1.0, 2.0 / 2 + 1 - 0.5, -2.0 / 2);
  CHECK(root == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(update_phi(VectorXd{{1.0, 1.0}}, VectorXd::Ones(2), 1.0, 0.0, 0.5, 0.5) ==
        doctest::Approx(root).epsilon(1e-12));
  CHECK(update_phi(VectorXd::Zero(1), VectorXd::Ones(1), 1.0, 1.0, 0.5, 0.5) == kFloor);
  // p = 4, c = 1, tau = 2, column of ones: the objective's maximizer is the
  // positive root of phi^2 + phi - 1, not 1.0
  const double numeric = oracle::golden_max_positive(
      [](double f) { return -2.0 * std::log(f) - 4.0 / (2 * f) + 0.0 * std::log(f) - 2.0 * f; });
  CHECK(numeric == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-8));
  CHECK(update_phi(VectorXd::Ones(4), VectorXd::Ones(4), 2.0, 0.0, 0.5, 1.0) ==
        doctest::Approx(numeric).epsilon(1e-8));
}

TEST_CASE("tau, eta and gamma examples") {
  CHECK(update_tau(0.5, 0.5, 1.0, 1.0).value == doctest::Approx(1.0));
  CHECK(update_eta(VectorXd{{0.25, 0.75}}, 1.0, 1.0, 1.0).value == doctest::Approx(1.0));
  const auto hs = update_tau(0.3, 0.7, 0.5, 0.5);
  CHECK(hs.value == kFloor);
  CHECK_FALSE(hs.negative_numerator);
  CHECK(update_gamma(1.0, 1.0, 0.2, 0.2).negative_numerator);
  CHECK(update_gamma(1.0, 1.0, 0.2, 0.2).value == kFloor);
  // mean form drops the -1
  CHECK(update_tau(0.5, 0.5, 1.0, 1.0, 0.0).value == doctest::Approx(2.0));
}

TEST_CASE("column hypers update in order tau, eta, gamma") {
  const VectorXd phi{{0.5, 2.0}};
  const auto h = update_column_hypers(phi, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 1.0);
  CHECK(h.tau(0) == doctest::Approx(3.0 / 1.5));
  CHECK(h.tau(1) == doctest::Approx(3.0 / 3.0));
  CHECK(h.eta == doctest::Approx((2 * 2.0 + 2.0 - 1) / (h.tau.sum() + 1.0)));
  CHECK(h.gamma == doctest::Approx(3.0 / (h.eta + 1.0)));
}

TEST_CASE("indicator examples") {
  CHECK(indicator_probability({0.0, 0.0}) == 0.5);
  CHECK(indicator_probability({50.0, 0.0}) >= 1.0 - 1e-20);
  CHECK(indicator_probability({0.0, 50.0}) <= 1e-20);
  const VectorXd col{{0.1, 0.1}};
  const VectorXd ones = VectorXd::Ones(2);
  const double z = expect_z(col, ones, ones, 1.0, std::log(0.5), std::log(0.5), 0.5, 0.5);
  CHECK(z == doctest::Approx(direct_indicator(col, ones, ones, 1.0, 0.5, 0.5, 0.5)).epsilon(1e-12));
  const double o = expect_o(col.array().square().matrix(), ones, ones, 1.0, std::log(0.5),
                            std::log(0.5), 0.5, 0.5);
  CHECK(o == doctest::Approx(direct_indicator(col, ones, ones, 1.0, 0.5, 0.5, 0.5)).epsilon(1e-12));
}

TEST_CASE("non-finite evidence is a numerical error") {
  CHECK_THROWS_AS(indicator_probability({std::nan(""), 0.0}), NumericalError);
}

TEST_CASE("mixing weight expectations") {
  const auto [l, r] = expect_ln_pi(1.0, 2, 1.0, 1.0);
  CHECK(l == doctest::Approx(-(0.5 + 1.0 / 3.0)).epsilon(1e-14));
  CHECK(r == doctest::Approx(-(0.5 + 1.0 / 3.0)).epsilon(1e-14));
  const auto big = expect_ln_pi(1e6, 1000000, 1.0, 1.0);
  CHECK(big.first < 0.0);
  CHECK(big.first > -1e-5);
}

TEST_CASE("factor column examples") {
  const VectorXd prec{{2.0, 4.0}};
  auto fc = update_factor_column(VectorXd{{1.0, -1.0, 3.0}}, MatrixXd::Zero(3, 2), VectorXd::Ones(3),
                                 prec);
  CHECK(fc.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fc.cov(0, 0) == doctest::Approx(0.5));
  CHECK(fc.cov(1, 1) == doctest::Approx(0.25));
  CHECK(fc.cov(0, 1) == 0.0);

  fc = update_factor_column(VectorXd{{3.0, 3.0}}, MatrixXd::Ones(2, 1), VectorXd::Ones(2),
                            VectorXd::Ones(1));
  CHECK(fc.mean(0) == doctest::Approx(2.0));
  CHECK(fc.cov(0, 0) == doctest::Approx(1.0 / 3.0));
  // quadrature of the 1-D posterior exp(-(3-x)^2 - x^2/2)
  const oracle::PositiveCdf shifted(
      [](double u) {
        const double x = u - 10.0;
        return -(3 - x) * (3 - x) - 0.5 * x * x;
      },
      -3.0);
  CHECK(shifted.mean() - 10.0 == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(shifted.second_moment() - shifted.mean() * shifted.mean() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-7));

  MatrixXd lam(3, 2);
  lam << 1, 0, 0, 2, 0, 0;  // orthogonal columns
  const VectorXd y{{1.0, 4.0, 7.0}};
  fc = update_factor_column(y, lam, VectorXd::Ones(3), VectorXd::Ones(2));
  CHECK(fc.mean(0) == doctest::Approx(1.0 / 2.0));
  CHECK(fc.mean(1) == doctest::Approx(8.0 / 5.0));
  CHECK(fc.cov(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("sigma and omega examples") {
  CHECK(update_local_variance(0.0, 1.0, 0.5) == kFloor);
  CHECK(update_local_variance(4.0, 1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(update_global_variance(VectorXd::Ones(2), VectorXd::Ones(2), 1.0, 0.0, 0.5, 0.5) ==
        doctest::Approx(oracle::largest_root(1.0, 1.5, -1.0)).epsilon(1e-12));
}

TEST_CASE("psi examples") {
  MatrixXd y(1, 2);
  y << 1, 1;
  CHECK(update_psi(y, MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 1))(0) ==
        doctest::Approx(1.0));
  MatrixXd lam(2, 1), x(1, 8);
  lam << 1.5, -0.5;
  for (int j = 0; j < 8; ++j) x(0, j) = normal();
  const VectorXd perfect = update_psi(lam * x, lam, x, x * x.transpose());
  CHECK(perfect(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(perfect(1) == doctest::Approx(0.2).epsilon(1e-12));

  MatrixXd yr(3, 4), lr(3, 2), xr(2, 4), a(2, 2);
  for (auto* m : {&yr, &lr, &xr, &a})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal();
  const MatrixXd second = xr * xr.transpose() + a * a.transpose();
  const VectorXd got = update_psi(yr, lr, xr, second);
  const MatrixXd full = yr * yr.transpose() - 2 * yr * xr.transpose() * lr.transpose() +
                        lr * second * lr.transpose() + 2 * MatrixXd::Identity(3, 3);
  for (int i = 0; i < 3; ++i) CHECK(got(i) == doctest::Approx(full(i, i) / 6.0).epsilon(1e-12));
}

TEST_CASE("pruning") {
  auto s = small_state(5, 4, 3, 1);
  const auto before = s;
  CHECK(prune_components(s, 1e-10).empty());
  CHECK(s.loading.lambda == before.loading.lambda);

  s.loading.lambda.col(1).setZero();
  const auto removed = prune_components(s, 1e-10);
  REQUIRE(removed.size() == 1);
  CHECK(removed[0] == before.component_ids[1]);
  CHECK(s.components() == 2);
  CHECK(s.loading.theta.cols() == 2);
  CHECK(s.loading.delta.cols() == 2);
  CHECK(s.loading.phi.size() == 2);
  CHECK(s.loading.tau.size() == 2);
  CHECK(s.loading.z.size() == 2);
  CHECK(s.factor.x_mean.rows() == 2);
  CHECK(s.factor.sigma.rows() == 2);
  CHECK(s.factor.rho.rows() == 2);
  CHECK(s.factor.omega.size() == 2);
  CHECK(s.factor.kappa.size() == 2);
  CHECK(s.factor.o.size() == 2);
  for (const auto& c : s.factor.x_cov) CHECK((c.rows() == 2 && c.cols() == 2));
  CHECK(s.factor.x_mean.row(1) == before.factor.x_mean.row(2));
  CHECK_NOTHROW(validate_state(s));

  s = before;
  s.loading.lambda.col(2).setConstant(0.5e-10);
  s.factor.x_mean.row(2).setConstant(3.0);
  CHECK(prune_components(s, 1e-10).size() == 1);
  CHECK(s.component_ids == std::vector<std::size_t>{before.component_ids[0], before.component_ids[1]});
}

TEST_CASE("pve examples and dense trace oracle") {
  auto s = small_state(4, 5, 1, 2);
  for (auto& c : s.factor.x_cov) c.setZero();
  CHECK(pve(s)(0) == doctest::Approx(1.0));

  s = small_state(4, 5, 2, 3);
  for (auto& c : s.factor.x_cov) c.setZero();
  s.loading.lambda.col(1) = s.loading.lambda.col(0);
  s.factor.x_mean.row(1) = -s.factor.x_mean.row(0);
  CHECK(pve(s)(0) == doctest::Approx(0.5));
  CHECK(pve(s)(1) == doctest::Approx(0.5));

  s = small_state(6, 7, 3, 4);
  for (auto& c : s.factor.x_cov) {
    MatrixXd a = MatrixXd::Random(3, 3);
    c = a * a.transpose();
  }
  const MatrixXd second = s.x_second_moment();
  VectorXd want(3);
  for (int k = 0; k < 3; ++k) {
    const MatrixXd lk = s.loading.lambda.col(k);
    want(k) = (lk * second.block(k, k, 1, 1) * lk.transpose()).trace();
  }
  want /= want.sum();
  const VectorXd got = pve(s);
  for (int k = 0; k < 3; ++k) CHECK(got(k) == doctest::Approx(want(k)).epsilon(1e-12));

  s.loading.lambda.setZero();
  CHECK_THROWS_AS(pve(s), NumericalError);
}

TEST_CASE("GIG-mode optimality on 1000 random triples") {
  for (int t = 0; t < 1000; ++t) {
    const double l = normal(2.0), d = log_unif(1e-4, 100.0), a = unif(0.05, 4.0);
    const double got = update_theta(l, d, a);
    const double want = oracle::golden_max_positive([&](double v) {
      return -0.5 * std::log(v) - l * l / (2 * v) + (a - 1) * std::log(v) - d * v;
    });
    CHECK(oracle::rel_close(got, std::max(want, kFloor), 1e-6));
  }
}

TEST_CASE("global variance matches the quadratic root on 1000 random instances") {
  for (int t = 0; t < 1000; ++t) {
    const int len = 1 + t % 20;
    VectorXd col(len), rates(len);
    for (int i = 0; i < len; ++i) {
      col(i) = normal();
      rates(i) = log_unif(1e-3, 10.0);
    }
    const double z = t % 3 == 0 ? 0.0 : (t % 3 == 1 ? 1.0 : unif(0, 1));
    const double tau = log_unif(1e-3, 10.0), b = unif(0.1, 3), c = unif(0.1, 3);
    const long double H = z * rates.sum() + tau;
    const long double B = z * len * b - (1 - z) * len / 2.0 + c - 1;
    const long double T = col.squaredNorm();
    const double root = oracle::largest_root(H, -B, -(1 - z) * T / 2);
    const double want = std::isfinite(root) ? std::max(root, kFloor) : kFloor;
    CHECK(oracle::rel_close(update_phi(col, rates, tau, z, b, c), want, 1e-6));
  }
}

TEST_CASE("monotone shrinkage of theta in delta") {
  for (int t = 0; t < 500; ++t) {
    const double l = normal(2.0), a = unif(0.05, 4.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 1e-6; d < 1e4; d *= 3.0) {
      const double v = update_theta(l, d, a);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("log-space indicator equals the direct ratio") {
  for (int t = 0; t < 300; ++t) {
    const int len = 1 + t % 4;
    VectorXd v(len), lv(len), lr(len);
    for (int i = 0; i < len; ++i) {
      v(i) = normal();
      lv(i) = log_unif(0.1, 5);
      lr(i) = log_unif(0.1, 5);
    }
    const double gv = log_unif(0.1, 5), pi = unif(0.05, 0.95), a = unif(0.3, 2), b = unif(0.3, 2);
    const double want = direct_indicator(v, lv, lr, gv, pi, a, b);
    const double got = expect_z(v, lv, lr, gv, std::log(pi), std::log1p(-pi), a, b);
    CHECK(std::abs(got - want) <= 1e-10);
  }
}

TEST_CASE("fit on a zero matrix drives everything to zero") {
  const auto data = DataMatrix::from_values(MatrixXd::Zero(10, 8));
  FitConfig cfg;
  cfg.k_init = 3;
  cfg.max_iterations = 100;
  cfg.warm_start_iterations = 10;
  const auto r = fit(data, Hyperparameters{}, cfg);
  if (r.state.components() > 0) {
    CHECK(r.state.loading.lambda.cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(r.state.factor.x_mean.cwiseAbs().maxCoeff() <= 1e-8);
  }
  for (Eigen::Index i = 0; i < 10; ++i)
    CHECK(r.state.noise.psi(i) == doctest::Approx(2.0 / 10.0).epsilon(1e-6));
}

TEST_CASE("rank-1 noiseless data is recovered") {
  VectorXd u(50), v(40);
  for (auto& e : u) e = normal(2.0);
  for (auto& e : v) e = normal(2.0);
  const auto data = DataMatrix::from_values(u * v.transpose());
  FitConfig cfg;
  cfg.k_init = 5;
  cfg.max_iterations = 500;
  cfg.seed = 3;
  const auto r = fit(data, Hyperparameters{}, cfg);
  const MatrixXd recon = r.state.loading.lambda * r.state.factor.x_mean;
  const double rel = (recon - data.values).norm() / data.values.norm();
  CHECK(rel <= 0.05);
  Eigen::JacobiSVD<MatrixXd> svd(recon);
  const auto sv = svd.singularValues();
  CHECK(sv(0) > 0.0);
  if (sv.size() > 1) CHECK(sv(1) <= 1e-6 * sv(0));
}

TEST_CASE("fits are deterministic and keep every scale above the floor") {
  auto data = DataMatrix::from_values(MatrixXd::Zero(2, 2));
  {
    Rng rng(5);
    MatrixXd y(30, 20);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
    y.block(0, 0, 6, 5).array() += 3.0;
    data = DataMatrix::from_values(y);
  }
  FitConfig cfg;
  cfg.k_init = 6;
  cfg.max_iterations = 150;
  cfg.warm_start_iterations = 20;
  cfg.seed = 17;
  const Hyperparameters h;
  auto a = start_fit(data, h, cfg);
  std::size_t checked = 0;
  continue_fit(a, data, h, cfg, cfg.max_iterations, [&](const FitProgress& p) {
    validate_state(p.state);
    for (Eigen::Index c = 0; c < p.state.loading.lambda.cols(); ++c)
      CHECK(p.state.loading.lambda.col(c).cwiseAbs().maxCoeff() > cfg.prune_eps);
    ++checked;
  });
  CHECK(checked > 0);
  const auto b = fit(data, h, cfg);
  CHECK(a.iteration == b.iteration);
  CHECK(a.state.loading.lambda == b.state.loading.lambda);
  CHECK(a.state.factor.x_mean == b.state.factor.x_mean);
  CHECK(a.state.noise.psi == b.state.noise.psi);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    CHECK(a.trace[t].residual_norm == b.trace[t].residual_norm);
    CHECK(a.trace[t].component_ids == b.trace[t].component_ids);
  }
  if (a.state.components() > 0 && a.state.loading.lambda.squaredNorm() > 0.0) {
    const VectorXd share = pve(a.state);
    CHECK(share.minCoeff() >= 0.0);
    CHECK(std::abs(share.sum() - 1.0) <= 1e-10);
  }
}

TEST_CASE("fit config validation") {
  FitConfig cfg;
  cfg.k_init = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = FitConfig{};
  cfg.classification_threshold = 0.4;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

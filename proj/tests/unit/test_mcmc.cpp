#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>

#include "core/error.hpp"
#include "mcmc/sampler.hpp"
#include "metrics/metrics.hpp"
#include "random/gig.hpp"
#include "sim/simulator.hpp"
#include "support/oracles.hpp"
#include "vem/fit.hpp"
#include "vem/updates.hpp"

using namespace bicmix;
using namespace bicmix::mcmc;

namespace {

struct Moments {
  double n = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  void add(double x) {
    n += 1;
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  double mean() const { return s1 / n; }
  double second() const { return s2 / n; }
  double var() const { return second() - mean() * mean(); }
  double se_mean() const { return std::sqrt(var() / n); }
  double se_second() const { return std::sqrt((s4 / n - second() * second()) / n); }
  // standard error of the sample variance (large-sample formula)
  double se_var() const {
    const double m = mean();
    const double m4 = s4 / n - 4 * m * s3 / n + 6 * m * m * s2 / n - 3 * m * m * m * m;
    return std::sqrt(std::max(0.0, m4 - var() * var()) / n);
  }
};

bool within(double got, double want, double se, double k = 3.0) {
  return std::abs(got - want) <= k * se;
}

constexpr int kDraws = 100000;

}  // namespace

TEST_CASE("GIG with b = 0 is a gamma draw") {
  Rng rng(1);
  Moments m;
  for (int i = 0; i < kDraws; ++i) m.add(sample_gig({1.7, 0.8, 0.0}, rng));
  CHECK(within(m.mean(), 2 * 1.7 / 0.8, m.se_mean()));
}

TEST_CASE("GIG inverse-Gaussian case matches the Bessel-ratio mean") {
  Rng rng(2);
  Moments m;
  for (int i = 0; i < kDraws; ++i) m.add(sample_gig({-0.5, 1.0, 1.0}, rng));
  const double bessel = oracle::gig_mean(-0.5, 1.0, 1.0);
  const oracle::PositiveCdf q([](double x) { return oracle::gig_log_kernel(-0.5, 1, 1, x); },
                              oracle::gig_log_peak(-0.5, 1, 1));
  CHECK(bessel == doctest::Approx(q.mean()).epsilon(1e-8));
  CHECK(within(m.mean(), bessel, m.se_mean()));
}

TEST_CASE("GIG moments match quadrature") {
  Rng rng(3);
  Moments m;
  for (int i = 0; i < kDraws; ++i) m.add(sample_gig({2.0, 3.0, 5.0}, rng));
  const oracle::PositiveCdf q([](double x) { return oracle::gig_log_kernel(2, 3, 5, x); },
                              oracle::gig_log_peak(2, 3, 5));
  CHECK(within(m.mean(), q.mean(), m.se_mean()));
  CHECK(within(m.second(), q.second_moment(), m.se_second()));
}

TEST_CASE("GIG covers extreme orders and rate ratios") {
  // orders up to p/2 + 1 for p = 200 and very unequal a, b
  const std::vector<GigParams> cases = {{101.0, 2.0, 3.0}, {-101.0, 2.0, 3.0}, {0.3, 1e-6, 1e6},
                                        {-0.3, 1e6, 1e-6}, {0.01, 1e-3, 1e-3}, {-50.0, 0.01, 400.0}};
  std::uint64_t seed = 10;
  for (const auto& g : cases) {
    Rng rng(++seed);
    Moments m;
    for (int i = 0; i < 20000; ++i) {
      const double x = sample_gig(g, rng);
      REQUIRE(std::isfinite(x));
      REQUIRE(x > 0.0);
      m.add(std::log(x));
    }
    // compare E[log x] against quadrature of the log kernel
    const double p = g.p_order, a = g.a_coef, b = g.b_coef;
    const double peak = oracle::gig_log_peak(p, a, b);
    const double mode = std::exp(oracle::golden_max(
        [&](double u) { return oracle::gig_log_kernel(p, a, b, std::exp(u)) + u; }, -60, 60));
    // integrate in u = log x around the mode of the log-density
    double z = 0, s = 0;
    const double u0 = std::log(mode);
    const double h = 1e-3;
    for (double u = u0 - 40; u <= u0 + 40; u += h) {
      const double w = std::exp(oracle::gig_log_kernel(p, a, b, std::exp(u)) + u - peak -
                                std::log(mode));
      z += w;
      s += w * u;
    }
    INFO("p=" << p << " a=" << a << " b=" << b);
    CHECK(within(m.mean(), s / z, m.se_mean()));
  }
}

TEST_CASE("GIG rejects invalid parameters") {
  Rng rng(4);
  CHECK_THROWS(sample_gig({1.0, 0.0, 1.0}, rng));
  CHECK_THROWS(sample_gig({-1.0, 1.0, 0.0}, rng));
  CHECK_THROWS(sample_gig({1.0, 1.0, -1.0}, rng));
  CHECK_THROWS(sample_gig({std::nan(""), 1.0, 1.0}, rng));
}

TEST_CASE("loading row with X = 0 draws from the prior") {
  Rng rng(5);
  const VectorXd v{{0.5, 2.0, 4.0}};
  std::vector<Moments> m(3);
  for (int i = 0; i < kDraws; ++i) {
    const VectorXd d = sample_loading_row(VectorXd::Zero(4), MatrixXd::Zero(3, 4), 1.0, v, rng);
    for (int k = 0; k < 3; ++k) m[k].add(d(k));
  }
  for (int k = 0; k < 3; ++k) CHECK(within(m[k].var(), v(k), m[k].se_var()));
}

TEST_CASE("loading row scalar conjugate case") {
  Rng rng(6);
  Moments m;
  MatrixXd x(1, 2);
  x << 1, 1;
  for (int i = 0; i < kDraws; ++i)
    m.add(sample_loading_row(VectorXd{{2.0, 2.0}}, x, 1.0, VectorXd::Ones(1), rng)(0));
  CHECK(within(m.mean(), 4.0 / 3.0, m.se_mean()));
  CHECK(within(m.var(), 1.0 / 3.0, m.se_var()));
  Rng r1(99), r2(99);
  CHECK(sample_loading_row(VectorXd{{2.0, 2.0}}, x, 1.0, VectorXd::Ones(1), r1) ==
        sample_loading_row(VectorXd{{2.0, 2.0}}, x, 1.0, VectorXd::Ones(1), r2));
}

TEST_CASE("multivariate rows have covariance equal to the inverse precision") {
  Rng rng(7);
  MatrixXd x(3, 5);
  x << 1, 0.5, -1, 0, 2, 0, 1, 1, -0.5, 0.3, 0.2, -0.4, 0, 1, 1;
  const VectorXd v{{1.0, 0.5, 2.0}};
  const VectorXd y{{1, 2, 0, -1, 0.5}};
  const double psi = 0.7;
  MatrixXd prec = x * x.transpose() / psi;
  prec.diagonal() += v.cwiseInverse();
  const MatrixXd cov = prec.inverse();
  const VectorXd mean = cov * x * y / psi;
  std::vector<VectorXd> draws;
  for (int i = 0; i < kDraws; ++i) draws.push_back(sample_loading_row(y, x, psi, v, rng));
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      Moments m;
      for (const auto& d : draws) m.add((d(a) - mean(a)) * (d(b) - mean(b)));
      CHECK(within(m.mean(), cov(a, b), m.se_mean()));
    }
}

TEST_CASE("factor column draws") {
  Rng rng(8);
  const VectorXd w{{0.25, 3.0}};
  std::vector<Moments> m(2);
  for (int i = 0; i < kDraws; ++i) {
    const VectorXd d = sample_factor_column(VectorXd{{1, 2, 3}}, MatrixXd::Zero(3, 2),
                                            VectorXd::Ones(3), w, rng);
    for (int k = 0; k < 2; ++k) m[k].add(d(k));
  }
  for (int k = 0; k < 2; ++k) CHECK(within(m[k].var(), w(k), m[k].se_var()));

  Moments s;
  for (int i = 0; i < kDraws; ++i)
    s.add(sample_factor_column(VectorXd{{2.0, 2.0}}, MatrixXd::Ones(2, 1), VectorXd::Ones(2),
                               VectorXd::Ones(1), rng)(0));
  CHECK(within(s.mean(), 4.0 / 3.0, s.se_mean()));
  CHECK(within(s.var(), 1.0 / 3.0, s.se_var()));
  Rng r1(5), r2(5);
  CHECK(sample_factor_column(VectorXd{{1, 2}}, MatrixXd::Ones(2, 1), VectorXd::Ones(2),
                             VectorXd::Ones(1), r1) ==
        sample_factor_column(VectorXd{{1, 2}}, MatrixXd::Ones(2, 1), VectorXd::Ones(2),
                             VectorXd::Ones(1), r2));
}

TEST_CASE("local variance boundary and gamma limit") {
  Rng rng(9);
  CHECK(sample_local_variance(0.0, 1.0, 0.5, rng) == kFloor);
  Moments m;
  for (int i = 0; i < kDraws; ++i) m.add(sample_local_variance(0.0, 2.0, 1.5, rng));
  CHECK(within(m.mean(), 1.0 / 2.0, m.se_mean()));  // Ga(1, 2)
}

TEST_CASE("dense global variance matches the GIG quadrature mean") {
  Rng rng(10);
  const double c = 0.5;
  Moments m;
  for (int i = 0; i < kDraws; ++i) m.add(sample_dense_global(2.0, 1.0, 2, c, rng));
  const oracle::PositiveCdf q([&](double x) { return oracle::gig_log_kernel(c - 1, 2, 2, x); },
                              oracle::gig_log_peak(c - 1, 2, 2));
  CHECK(within(m.mean(), q.mean(), m.se_mean()));
}

TEST_CASE("local rate on a one-gene chain passes goodness of fit") {
  // one gene, one sparse component: successive theta / delta draws
  Rng rng(11);
  const double a = 0.5, b = 0.5, phi = 0.8, lambda = 0.6;
  double delta = 1.0;
  std::vector<double> thetas, deltas, pilot;
  for (int i = 0; i < kDraws; ++i) {
    const double theta = sample_local_variance(lambda * lambda, delta, a, rng);
    delta = sample_local_rate(theta, phi, a, b, rng);
    thetas.push_back(theta);
  }
  // the delta conditional given each recorded theta, tested by probability
  // integral transform against Ga(a + b, theta + phi)
  Rng r2(12);
  std::vector<double> u, pu;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double d = sample_local_rate(thetas[i], phi, a, b, r2);
    u.push_back(boost::math::cdf(boost::math::gamma_distribution<double>(a + b, 1.0 / (thetas[i] + phi)), d));
  }
  for (int i = 0; i < 20000; ++i) pu.push_back(r2.uniform());
  const auto gof = oracle::chi_square_gof(u, pu, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(gof.p_value >= 0.01);
}

TEST_CASE("indicator and mixing weight draws") {
  Rng rng(13);
  Moments z;
  for (int i = 0; i < kDraws; ++i)
    z.add(rng.bernoulli(vem::indicator_probability({0.0, 0.0})) ? 1.0 : 0.0);
  CHECK(within(z.mean(), 0.5, z.se_mean()));
  CHECK(vem::indicator_probability({50.0, 0.0}) >= 1.0 - 1e-20);
  Moments pi;
  for (int i = 0; i < kDraws; ++i) pi.add(sample_mixing_weight(4, 4, 1.0, 1.0, rng));
  CHECK(within(pi.mean(), 5.0 / 6.0, pi.se_mean()));
}

TEST_CASE("noise draws") {
  Rng rng(14);
  Moments m;
  for (int i = 0; i < kDraws; ++i) m.add(sample_noise(0.0, 2, rng));
  CHECK(within(m.mean(), 1.0, m.se_mean()));
  MatrixXd y = MatrixXd::Zero(1, 2);
  Rng r1(15), r2(15);
  const VectorXd a = sample_psi(y, MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 2), r1);
  const VectorXd b = sample_psi(y, MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 2), r2);
  CHECK(a == b);
  Rng r3(15);
  CHECK(a(0) == sample_noise(0.0, 2, r3));
}

TEST_CASE("chain with zero sweeps returns the initialized state; chains are deterministic") {
  Rng rng(1);
  MatrixXd y(6, 5);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
  const auto data = DataMatrix::from_values(y);
  ChainConfig cfg;
  cfg.sweeps = 0;
  cfg.seed = 21;
  const auto r0 = run_chain(data, 3, Hyperparameters{}, cfg);
  Rng init(21);
  const auto s0 = initialize_state(6, 5, 3, Hyperparameters{}, init);
  CHECK(r0.state.loading.lambda == s0.loading.lambda);
  CHECK(r0.state.factor.x_mean == s0.factor.x_mean);
  CHECK(r0.state.noise.psi == s0.noise.psi);

  cfg.sweeps = 30;
  cfg.record = true;
  cfg.record_from = 10;
  cfg.thin = 5;
  const auto a = run_chain(data, 3, Hyperparameters{}, cfg);
  const auto b = run_chain(data, 3, Hyperparameters{}, cfg);
  CHECK(a.state.loading.lambda == b.state.loading.lambda);
  CHECK(a.state.factor.x_mean == b.state.factor.x_mean);
  CHECK(a.samples.size() == 4);
  for (const auto& s : a.samples) CHECK_NOTHROW(validate_state(s));
}

TEST_CASE("chain configuration is validated") {
  ChainConfig cfg;
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  Rng rng(1);
  CHECK_THROWS_AS(initialize_state(3, 3, 0, Hyperparameters{}, rng), UsageError);
}

TEST_CASE("warm start is no worse than a cold start") {
  double warm = 0.0, cold = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto sc = sim::preset("desk-sim1-ln");
    sc.p = 100;
    sc.n = 60;
    sc.seed = seed;
    const auto [data, truth] = sim::simulate(sc);
    vem::FitConfig cfg;
    cfg.k_init = 10;
    cfg.max_iterations = 300;
    cfg.seed = seed;
    for (std::size_t ws : {std::size_t{100}, std::size_t{0}}) {
      cfg.warm_start_iterations = ws;
      const auto r = vem::fit(data, Hyperparameters{}, cfg);
      const auto found = metrics::extract_biclusters(r.state, 0.9, 0.0, "r");
      const double rec =
          metrics::recovery_relevance(truth.biclusters, found, metrics::JaccardMode::Cells).recovery;
      (ws ? warm : cold) += rec / 5.0;
    }
  }
  INFO("warm " << warm << " cold " << cold);
  CHECK(warm >= cold - 0.05);
}

// Forward draw of every variable from the prior hierarchy.
namespace {

void forward_side(MatrixXd& values, MatrixXd& local_var, MatrixXd& local_rate, VectorXd& global_var,
                  VectorXd& col_rate, double& top, double& global_rate, VectorXd& ind,
                  double& ln_pi, double& ln_1m, double a, double b, double c, double d, double e,
                  double f, double nu, double alpha, double beta, bool by_column, Rng& rng) {
  global_rate = rng.gamma(f, nu);
  top = rng.gamma(e, global_rate);
  const double pi = rng.beta(alpha, beta);
  ln_pi = std::log(pi);
  ln_1m = std::log1p(-pi);
  const Eigen::Index k = global_var.size();
  const Eigen::Index len = by_column ? values.rows() : values.cols();
  for (Eigen::Index c_ = 0; c_ < k; ++c_) {
    col_rate(c_) = rng.gamma(d, top);
    global_var(c_) = rng.gamma(c, col_rate(c_));
    ind(c_) = rng.bernoulli(pi) ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < len; ++i) {
      double& lr = by_column ? local_rate(i, c_) : local_rate(c_, i);
      double& lv = by_column ? local_var(i, c_) : local_var(c_, i);
      double& v = by_column ? values(i, c_) : values(c_, i);
      lr = rng.gamma(b, global_var(c_));
      lv = rng.gamma(a, lr);
      v = rng.normal(0.0, std::sqrt(ind(c_) > 0.5 ? lv : global_var(c_)));
    }
  }
}

void forward(ModelState& s, MatrixXd& y, const Hyperparameters& h, Rng& rng) {
  auto& L = s.loading;
  auto& F = s.factor;
  forward_side(L.lambda, L.theta, L.delta, L.phi, L.tau, L.eta, L.gamma, L.z, L.ln_pi,
               L.ln_one_minus_pi, h.a, h.b, h.c, h.d, h.e, h.f, h.nu, h.alpha, h.beta, true, rng);
  forward_side(F.x_mean, F.sigma, F.rho, F.omega, F.kappa, F.chi, F.varphi, F.o, F.ln_pi,
               F.ln_one_minus_pi, h.a_x, h.b_x, h.c_x, h.d_x, h.e_x, h.f_x, h.xi, h.alpha_x,
               h.beta_x, false, rng);
  for (Eigen::Index i = 0; i < y.rows(); ++i) s.noise.psi(i) = rng.inverse_gamma(1.0, 1.0);
  y = L.lambda * F.x_mean;
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += rng.normal(0.0, std::sqrt(s.noise.psi(i)));
}

}  // namespace

TEST_CASE("getting it right: successive conditionals match forward simulation") {
  // Shapes large enough for the compared moments to be finite.
  Hyperparameters h;
  h.a = h.b = h.c = h.d = h.e = h.f = 3.0;
  h.a_x = h.b_x = h.c_x = h.d_x = h.e_x = h.f_x = 3.0;
  Rng rng(31);
  ModelState s = initialize_state(2, 2, 1, h, rng);
  MatrixXd y(2, 2);

  auto record = [](const ModelState& st, std::vector<Moments>& m) {
    m[0].add(st.loading.lambda(0, 0));
    m[1].add(st.loading.lambda(0, 0) * st.loading.lambda(0, 0));
    m[2].add(1.0 / st.noise.psi(0));
    m[3].add(1.0 / (st.noise.psi(0) * st.noise.psi(0)));
    m[4].add(st.loading.z(0));
  };
  constexpr int kForward = 200000;
  std::vector<Moments> fwd(5);
  for (int i = 0; i < kForward; ++i) {
    forward(s, y, h, rng);
    record(s, fwd);
  }
  // successive conditional: Gibbs sweep given y, then redraw y given the state
  constexpr int kSweeps = 400000;
  constexpr int kBatch = 2000;
  forward(s, y, h, rng);
  std::vector<std::vector<double>> batches(5);
  std::vector<Moments> cur(5);
  for (int t = 1; t <= kSweeps; ++t) {
    sweep(s, y, h, rng);
    y = s.loading.lambda * s.factor.x_mean;
    for (Eigen::Index j = 0; j < 2; ++j)
      for (Eigen::Index i = 0; i < 2; ++i) y(i, j) += rng.normal(0.0, std::sqrt(s.noise.psi(i)));
    record(s, cur);
    if (t % kBatch == 0) {
      for (int q = 0; q < 5; ++q) batches[q].push_back(cur[q].mean());
      cur.assign(5, Moments{});
    }
  }
  const char* names[] = {"lambda", "lambda^2", "1/psi", "1/psi^2", "z"};
  for (int q = 0; q < 5; ++q) {
    Moments bm;
    for (double v : batches[q]) bm.add(v);
    const double se = std::sqrt(bm.se_mean() * bm.se_mean() + fwd[q].se_mean() * fwd[q].se_mean());
    INFO(names[q] << ": forward " << fwd[q].mean() << " successive " << bm.mean() << " se " << se);
    CHECK(within(bm.mean(), fwd[q].mean(), se));
  }
}

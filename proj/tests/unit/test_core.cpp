#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/types.hpp"
#include "mcmc/sampler.hpp"
#include "random/rng.hpp"

using namespace bicmix;

namespace {

// Nearest-class rule written out independently: >= t sparse, <= 1 - t dense,
// otherwise the nearer side with 0.5 counted as dense, flagged ambiguous.
std::pair<bool, bool> reference_side(double v, double t) {
  if (v >= t) return {true, false};
  if (v <= 1.0 - t) return {false, false};
  return {v > 0.5, true};
}

}  // namespace

TEST_CASE("hyperparameter defaults are the horseshoe configuration") {
  const Hyperparameters h;
  for (double v : {h.a, h.b, h.c, h.d, h.e, h.f, h.a_x, h.b_x, h.c_x, h.d_x, h.e_x, h.f_x})
    CHECK(v == 0.5);
  CHECK(h.nu == 1.0);
  CHECK(h.xi == 1.0);
  CHECK(h.alpha == 1.0);
  CHECK(h.beta == 1.0);
  CHECK(h.alpha_x == 1.0);
  CHECK(h.beta_x == 1.0);
  CHECK_NOTHROW(h.validate());
}

TEST_CASE("non-positive hyperparameters are rejected as usage errors") {
  Hyperparameters h;
  h.c_x = 0.0;
  CHECK_THROWS_AS(h.validate(), UsageError);
  h = Hyperparameters{};
  h.nu = std::nan("");
  CHECK_THROWS_AS(h.validate(), UsageError);
}

TEST_CASE("classify_component examples") {
  auto c = classify_component(0.95, 0.95, 0.9);
  CHECK(c.cls == SparsityClass::SS);
  CHECK_FALSE(c.ambiguous());
  c = classify_component(0.95, 0.02, 0.9);
  CHECK(c.cls == SparsityClass::SD);
  c = classify_component(0.5, 0.95, 0.9);
  CHECK(c.cls == SparsityClass::DS);
  CHECK(c.z_ambiguous);
  CHECK_FALSE(c.o_ambiguous);
}

TEST_CASE("classify_component matches the nearest-class table on the 3x3 grid") {
  const double grid[] = {0.02, 0.5, 0.95};
  for (double z : grid)
    for (double o : grid) {
      const auto c = classify_component(z, o, 0.9);
      const auto [zs, za] = reference_side(z, 0.9);
      const auto [os, oa] = reference_side(o, 0.9);
      CHECK((c.loading() == Sparsity::Sparse) == zs);
      CHECK((c.factor() == Sparsity::Sparse) == os);
      CHECK(c.z_ambiguous == za);
      CHECK(c.o_ambiguous == oa);
    }
}

TEST_CASE("classify_component is symmetric under swapping z and o") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double z = u(gen), o = u(gen), t = 0.5 + 0.5 * u(gen) + 1e-9;
    const auto a = classify_component(z, o, std::min(t, 1.0));
    const auto b = classify_component(o, z, std::min(t, 1.0));
    CHECK(a.loading() == b.factor());
    CHECK(a.factor() == b.loading());
    CHECK(a.z_ambiguous == b.o_ambiguous);
  }
}

TEST_CASE("classify_component rejects thresholds outside (0.5, 1]") {
  CHECK_THROWS_AS(classify_component(0.9, 0.9, 0.5), UsageError);
  CHECK_THROWS_AS(classify_component(0.9, 0.9, 1.01), UsageError);
}

TEST_CASE("sparsity class names round trip") {
  for (auto c : {SparsityClass::SS, SparsityClass::SD, SparsityClass::DS, SparsityClass::DD})
    CHECK(sparsity_class_from_string(to_string(c)) == c);
  CHECK_THROWS(sparsity_class_from_string("XY"));
}

TEST_CASE("support examples") {
  CHECK(support(VectorXd{{0.0, 0.0, 3.2}}, 1e-10) == std::vector<std::size_t>{2});
  CHECK(support(VectorXd{{0.0, 0.0, 0.0}}, 1e-10).empty());
  CHECK(support(VectorXd{{1e-12, 1e-6, -2.0}}, 1e-8) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("support shrinks as eps grows") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    VectorXd v(20);
    for (auto& x : v) x = nd(gen) * (t % 2 ? 1e-6 : 1.0);
    const auto base = support(v, 0.0);
    const double eps = std::abs(nd(gen)) * (t % 2 ? 1e-6 : 1.0);
    for (auto i : support(v, eps))
      CHECK(std::find(base.begin(), base.end(), i) != base.end());
  }
}

TEST_CASE("validate_state accepts a fresh state and names a floor violation") {
  Rng rng(1);
  auto s = mcmc::initialize_state(6, 5, 3, Hyperparameters{}, rng);
  CHECK_NOTHROW(validate_state(s));
  s.loading.delta(2, 1) = 0.0;
  try {
    validate_state(s);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("delta") != std::string::npos);
  }
  s = mcmc::initialize_state(6, 5, 3, Hyperparameters{}, rng);
  s.factor.o(0) = 1.5;
  CHECK_THROWS_AS(validate_state(s), NumericalError);
  s = mcmc::initialize_state(6, 5, 3, Hyperparameters{}, rng);
  s.noise.psi.resize(4);
  CHECK_THROWS_AS(validate_state(s), NumericalError);
}

TEST_CASE("data matrix validation") {
  auto d = DataMatrix::from_values(MatrixXd::Ones(3, 2));
  CHECK_NOTHROW(d.validate());
  CHECK(d.gene_ids.size() == 3);
  d.values(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(d.validate(), DataError);
  CHECK_THROWS_AS(DataMatrix::from_values(MatrixXd::Ones(1, 4)).validate(), DataError);
}

TEST_CASE("rng state serializes and restores the stream") {
  Rng a(42);
  for (int i = 0; i < 17; ++i) a.normal();
  Rng b;
  b.deserialize(a.serialize());
  CHECK(a == b);
  for (int i = 0; i < 50; ++i) CHECK(a.gamma(0.7, 2.0) == b.gamma(0.7, 2.0));
}

TEST_CASE("parallel_for visits every index exactly once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK(thread_count() >= 1);
}

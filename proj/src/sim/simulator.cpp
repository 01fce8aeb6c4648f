#include "sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

#include "core/error.hpp"

namespace bicmix::sim {

namespace {

constexpr int kMaxSupportTries = 10000;

std::size_t overlap(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

std::vector<std::size_t> draw_subset(std::size_t length, std::size_t m, Rng& rng) {
  std::vector<std::size_t> pool(length);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t t = 0; t < m; ++t) {
    const auto pick = static_cast<std::size_t>(rng.uniform_int(t, length - 1));
    std::swap(pool[t], pool[pick]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

void SimConfig::validate() const {
  std::ostringstream os;
  if (p < 2 || n < 2) os << "p and n must be at least 2; ";
  if (m_min < 1 || m_min > m_max || m_max > std::min(p, n))
    os << "m range must satisfy 1 <= m_min <= m_max <= min(p, n); ";
  if (max_shared > m_min) os << "max_shared must not exceed m_min; ";
  if (!(value_sd > 0.0)) os << "value_sd must be positive; ";
  if (!(noise_var > 0.0)) os << "noise_var must be positive; ";
  if (!os.str().empty()) throw UsageError("invalid simulation config: " + os.str());
}

std::vector<std::string> preset_names() {
  return {"sim1-ln",      "sim1-hn",      "sim2-ln",      "sim2-hn",
          "desk-sim1-ln", "desk-sim1-hn", "desk-sim2-ln", "desk-sim2-hn"};
}

SimConfig preset(const std::string& name) {
  SimConfig c;
  std::string base = name;
  const bool desk = base.rfind("desk-", 0) == 0;
  if (desk) base = base.substr(5);
  if (base != "sim1-ln" && base != "sim1-hn" && base != "sim2-ln" && base != "sim2-hn")
    throw UsageError("unknown simulation preset '" + name + "'");
  const bool sim2 = base.rfind("sim2", 0) == 0;
  c.noise_var = base.ends_with("-hn") ? 2.0 : 1.0;
  if (desk) {
    c.p = 200;
    c.n = 100;
    c.k_sparse = 5;
    c.k_dense = sim2 ? 2 : 0;
    c.m_min = 5;
    c.m_max = 15;
  } else {
    c.k_sparse = 10;
    c.k_dense = sim2 ? 5 : 0;
  }
  c.shuffle_pairing = sim2;
  return c;
}

VectorXd gen_sparse_vector(std::size_t length, std::size_t m_min, std::size_t m_max,
                           const std::vector<std::vector<std::size_t>>& existing,
                           std::size_t max_shared, double value_sd, Rng& rng) {
  if (m_min < 1 || m_min > m_max || m_max > length)
    throw UsageError("sparse vector size range is infeasible for the vector length");
  const auto m = static_cast<std::size_t>(rng.uniform_int(m_min, m_max));
  for (int attempt = 0; attempt < kMaxSupportTries; ++attempt) {
    auto idx = draw_subset(length, m, rng);
    const bool ok = std::all_of(existing.begin(), existing.end(), [&](const auto& other) {
      return overlap(idx, other) <= max_shared;
    });
    if (!ok) continue;
    VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(length));
    for (auto i : idx) v(static_cast<Eigen::Index>(i)) = rng.normal(0.0, value_sd);
    return v;
  }
  std::ostringstream os;
  os << "could not place a support of size " << m << " among " << existing.size()
     << " existing supports with overlap cap " << max_shared;
  throw UsageError(os.str());
}

std::pair<DataMatrix, GroundTruth> simulate(const SimConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t k = config.k_sparse + config.k_dense;
  const auto P = static_cast<Eigen::Index>(config.p);
  const auto N = static_cast<Eigen::Index>(config.n);
  const auto K = static_cast<Eigen::Index>(k);
  GroundTruth truth;
  truth.lambda = MatrixXd::Zero(P, K);
  MatrixXd x = MatrixXd::Zero(K, N);
  std::vector<bool> factor_sparse(k, false);

  std::vector<std::vector<std::size_t>> supports;
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    if (c < config.k_sparse) {
      truth.lambda.col(ci) = gen_sparse_vector(config.p, config.m_min, config.m_max, supports,
                                               config.max_shared, config.value_sd, rng);
      supports.push_back(support(VectorXd(truth.lambda.col(ci)), 0.0));
    } else {
      for (Eigen::Index i = 0; i < P; ++i) truth.lambda(i, ci) = rng.normal(0.0, config.value_sd);
    }
    truth.loading_sparse.push_back(c < config.k_sparse);
  }
  supports.clear();
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    if (c < config.k_sparse) {
      x.row(ci) = gen_sparse_vector(config.n, config.m_min, config.m_max, supports,
                                    config.max_shared, config.value_sd, rng)
                      .transpose();
      supports.push_back(support(VectorXd(x.row(ci).transpose()), 0.0));
    } else {
      for (Eigen::Index j = 0; j < N; ++j) x(ci, j) = rng.normal(0.0, config.value_sd);
    }
    factor_sparse[c] = c < config.k_sparse;
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle_pairing) {
    for (std::size_t t = k; t > 1; --t) {
      const auto pick = static_cast<std::size_t>(rng.uniform_int(0, t - 1));
      std::swap(order[t - 1], order[pick]);
    }
  }
  truth.x.resize(K, N);
  for (std::size_t c = 0; c < k; ++c) {
    truth.x.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(order[c]));
    truth.factor_sparse.push_back(factor_sparse[order[c]]);
  }

  MatrixXd y = truth.lambda * truth.x;
  const double sd = std::sqrt(config.noise_var);
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index i = 0; i < P; ++i) y(i, j) += rng.normal(0.0, sd);

  for (std::size_t c = 0; c < k; ++c) {
    if (!truth.loading_sparse[c] || !truth.factor_sparse[c]) continue;
    const auto ci = static_cast<Eigen::Index>(c);
    Bicluster b;
    b.genes = support(VectorXd(truth.lambda.col(ci)), 0.0);
    b.samples = support(VectorXd(truth.x.row(ci).transpose()), 0.0);
    b.component_index = c;
    b.run_id = "truth";
    truth.biclusters.push_back(std::move(b));
  }
  return {DataMatrix::from_values(std::move(y)), std::move(truth)};
}

DataMatrix remove_pcs(const DataMatrix& data, std::size_t n_pcs, bool center_rows) {
  const auto rank_cap = std::min(data.genes(), data.samples());
  if (n_pcs >= rank_cap) {
    std::ostringstream os;
    os << "n_pcs must be smaller than min(p, n) = " << rank_cap;
    throw UsageError(os.str());
  }
  DataMatrix out = data;
  if (center_rows) out.values.colwise() -= out.values.rowwise().mean();
  if (n_pcs == 0) return out;
  Eigen::BDCSVD<MatrixXd> svd(out.values, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("singular value decomposition failed");
  const auto r = static_cast<Eigen::Index>(n_pcs);
  out.values -= svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
                svd.matrixV().leftCols(r).transpose();
  return out;
}

}  // namespace bicmix::sim

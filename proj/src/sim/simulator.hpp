#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/types.hpp"
#include "random/rng.hpp"

namespace bicmix::sim {

struct SimConfig {
  std::size_t p = 500;
  std::size_t n = 300;
  std::size_t k_sparse = 10;
  std::size_t k_dense = 0;
  std::size_t m_min = 5;
  std::size_t m_max = 20;
  double value_sd = 1.4142135623730951;
  std::size_t max_shared = 5;  // pairwise support overlap cap within one side
  double noise_var = 1.0;
  bool shuffle_pairing = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Named configurations: sim1-ln, sim1-hn, sim2-ln, sim2-hn at full size and
// desk-sim1-ln, desk-sim1-hn, desk-sim2-ln, desk-sim2-hn at p=200, n=100.
SimConfig preset(const std::string& name);
std::vector<std::string> preset_names();

struct GroundTruth {
  MatrixXd lambda;  // p x K
  MatrixXd x;       // K x n
  std::vector<bool> loading_sparse;
  std::vector<bool> factor_sparse;
  std::vector<Bicluster> biclusters;  // components sparse on both sides
};

// m ~ U{m_min..m_max}; support drawn uniformly among sets overlapping each
// existing support in at most max_shared indices; values N(0, value_sd^2).
VectorXd gen_sparse_vector(std::size_t length, std::size_t m_min, std::size_t m_max,
                           const std::vector<std::vector<std::size_t>>& existing,
                           std::size_t max_shared, double value_sd, Rng& rng);

std::pair<DataMatrix, GroundTruth> simulate(const SimConfig& config);

// Row-centers the data and subtracts its rank-n_pcs SVD reconstruction.
DataMatrix remove_pcs(const DataMatrix& data, std::size_t n_pcs, bool center_rows = true);

}  // namespace bicmix::sim

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bicmix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Lower bound applied to every positive scale parameter. Horseshoe shapes
// (a + b - 1 = 0) drive several MAP updates to exactly zero.
inline constexpr double kFloor = 1e-10;

struct Hyperparameters {
  // loading side
  double a = 0.5, b = 0.5, c = 0.5, d = 0.5, e = 0.5, f = 0.5;
  double nu = 1.0;
  // factor side
  double a_x = 0.5, b_x = 0.5, c_x = 0.5, d_x = 0.5, e_x = 0.5, f_x = 0.5;
  double xi = 1.0;
  // beta-Bernoulli mixing
  double alpha = 1.0, beta = 1.0;
  double alpha_x = 1.0, beta_x = 1.0;

  void validate() const;
  bool operator==(const Hyperparameters&) const = default;
};

struct DataMatrix {
  MatrixXd values;  // p x n
  std::vector<std::string> gene_ids;
  std::vector<std::string> sample_ids;

  std::size_t genes() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(values.cols()); }

  // Fills missing identifiers with gene_<i> / sample_<j>.
  static DataMatrix from_values(MatrixXd values);
  void validate() const;
};

struct LoadingSide {
  MatrixXd lambda;  // p x K
  MatrixXd theta;   // p x K
  MatrixXd delta;   // p x K
  VectorXd phi;     // K
  VectorXd tau;     // K
  double eta = 1.0;
  double gamma = 1.0;
  VectorXd z;  // K, 1 = sparse
  double ln_pi = -0.6931471805599453;
  double ln_one_minus_pi = -0.6931471805599453;
};

struct FactorSide {
  MatrixXd x_mean;             // K x n
  std::vector<MatrixXd> x_cov;  // n entries of K x K
  MatrixXd sigma;               // K x n
  MatrixXd rho;                 // K x n
  VectorXd omega;               // K
  VectorXd kappa;               // K
  double chi = 1.0;
  double varphi = 1.0;
  VectorXd o;  // K, 1 = sparse
  double ln_pi = -0.6931471805599453;
  double ln_one_minus_pi = -0.6931471805599453;
};

struct NoiseModel {
  VectorXd psi;  // p
};

struct ModelState {
  LoadingSide loading;
  FactorSide factor;
  NoiseModel noise;
  // Stable identifier of each component, preserved through pruning.
  std::vector<std::size_t> component_ids;

  std::size_t components() const { return component_ids.size(); }
  std::size_t genes() const { return static_cast<std::size_t>(loading.lambda.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(factor.x_mean.cols()); }

  // Sum over samples of the per-column posterior covariances.
  MatrixXd x_cov_sum() const;
  // <X X^T> = <X><X>^T + sum_j cov_j
  MatrixXd x_second_moment() const;
};

// Throws NumericalError naming the first field that violates a scale floor,
// a [0,1] indicator bound, or a shape constraint.
void validate_state(const ModelState& state);

enum class Sparsity { Sparse, Dense };

enum class SparsityClass { SS, SD, DS, DD };

struct ComponentClass {
  SparsityClass cls = SparsityClass::DD;
  double z = 0.0;
  double o = 0.0;
  bool z_ambiguous = false;
  bool o_ambiguous = false;

  Sparsity loading() const {
    return (cls == SparsityClass::SS || cls == SparsityClass::SD) ? Sparsity::Sparse
                                                                   : Sparsity::Dense;
  }
  Sparsity factor() const {
    return (cls == SparsityClass::SS || cls == SparsityClass::DS) ? Sparsity::Sparse
                                                                   : Sparsity::Dense;
  }
  bool ambiguous() const { return z_ambiguous || o_ambiguous; }
};

// threshold must lie in (0.5, 1]. Values strictly inside (1 - t, t) fall to the
// nearer class (0.5 counts as dense) and raise the matching ambiguity flag.
ComponentClass classify_component(double z, double o, double threshold);

const char* to_string(SparsityClass cls);
SparsityClass sparsity_class_from_string(const std::string& s);

struct Bicluster {
  std::vector<std::size_t> genes;    // sorted, unique
  std::vector<std::size_t> samples;  // sorted, unique
  std::size_t component_index = 0;
  std::string run_id;
};

// Indices i with |v_i| > eps.
std::vector<std::size_t> support(std::span<const double> v, double eps);
std::vector<std::size_t> support(const VectorXd& v, double eps);

}  // namespace bicmix

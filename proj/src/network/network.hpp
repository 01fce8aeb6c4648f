#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "core/types.hpp"
#include "vem/fit.hpp"

namespace bicmix::network {

// Posterior summary of one fit as consumed by the network stage.
struct FittedModel {
  MatrixXd lambda;     // p x K
  MatrixXd x_mean;     // K x n
  MatrixXd x_cov_sum;  // K x K, <X X^T> - <X><X>^T
  VectorXd psi;        // p
  VectorXd z;          // K
  VectorXd o;          // K
  std::vector<std::size_t> component_ids;
  std::vector<std::string> gene_ids;
  std::vector<std::string> sample_ids;

  std::size_t components() const { return component_ids.size(); }
  static FittedModel from_state(const ModelState& state, const DataMatrix& data);
  // Throws DataError naming the first inconsistent shape.
  void validate() const;
};

enum class StabilityRule { Or, And };

struct StabilityWindow {
  std::size_t checkpoint_a = 0;
  std::size_t checkpoint_b = 0;
  std::size_t max_change = 50;
  StabilityRule rule = StabilityRule::Or;
};

// Stable ids of components present at checkpoint_b whose gene and sample
// counts moved by at most max_change since checkpoint_a (OR discards when either
// count moves, AND only when both do). DataError when a checkpoint is missing.
std::vector<std::size_t> stability_filter(const std::vector<vem::IterationTrace>& trace,
                                          const StabilityWindow& window);

// Positions in the model of the listed stable ids; ids no longer present are skipped.
std::vector<std::size_t> positions_of(const FittedModel& model,
                                      const std::vector<std::size_t>& ids);

// Two-sided rank-sum p-value. Exact enumeration when |x| + |y| <= 12 and there
// are no ties, otherwise the normal approximation with tie and continuity
// corrections. Throws UsageError for an empty sample.
double wilcoxon_rank_sum(const std::vector<double>& x, const std::vector<double>& y);

enum class NetType { SubsetSpecific, SubsetDifferential, Ubiquitous };
enum class WilcoxonValues { NonZero, All };

NetType net_type_from_string(const std::string& s);
const char* to_string(NetType t);

struct SelectionSpec {
  NetType net_type = NetType::Ubiquitous;
  std::string target_class;
  std::string class_a;
  std::string class_b;
  double wilcoxon_p_threshold = 1e-10;
  WilcoxonValues values = WilcoxonValues::NonZero;
  double support_eps = 0.0;
};

struct Selection {
  std::vector<std::size_t> components;  // positions in the model, ascending
  std::vector<std::string> warnings;
};

// labels are aligned to the samples of the model; candidates are positions.
Selection select_components(const FittedModel& model, const std::vector<std::string>& labels,
                            const SelectionSpec& spec,
                            const std::vector<std::size_t>& candidates);

// Omega = Lambda_A Sigma_AA Lambda_A^T + Psi restricted to gene_subset.
MatrixXd build_covariance(const MatrixXd& lambda_a, const MatrixXd& sigma_aa, const VectorXd& psi,
                          const std::vector<std::size_t>& gene_subset);

// rho_ij = -D_ij / sqrt(D_ii D_jj) with D = omega^-1, unit diagonal.
MatrixXd partial_correlations(const MatrixXd& omega);

struct EdgeModelOptions {
  double central_quantile = 0.75;  // |rho| quantile bounding the null fit
  std::size_t min_edges = 50;
  double fallback_abs_threshold = 0.2;
  std::size_t grid_points = 2048;
};

struct EdgeModelFit {
  std::vector<double> probability;
  double kappa = 0.0;  // null degrees of freedom, 0 in fallback mode
  double eta0 = 1.0;
  double bandwidth = 0.0;
  bool fallback = false;
};

// log f0(rho; kappa) for f0 proportional to (1 - rho^2)^((kappa - 3) / 2).
double null_log_density(double rho, double kappa);
// P(|rho| <= c) under f0.
double null_central_mass(double c, double kappa);

// Two-group mixture local fdr on partial correlations; probabilities are
// monotone non-decreasing in |rho|.
EdgeModelFit edge_probabilities(const std::vector<double>& pcors,
                                const EdgeModelOptions& options = {});

struct EdgeRecord {
  std::string gene_a;  // gene_a < gene_b
  std::string gene_b;
  double partial_correlation = 0.0;
  double probability = 0.0;
  std::size_t replication = 0;
};

// Canonical order of two gene ids.
EdgeRecord make_edge(const std::string& g1, const std::string& g2, double pcor, double prob);

struct EnsembleSpec {
  double edge_prob_threshold = 0.8;
  std::size_t replication_threshold = 10;
};

// Counts runs in which each edge reaches edge_prob_threshold and keeps edges
// with replication >= replication_threshold, sorted by (gene_a, gene_b).
std::vector<EdgeRecord> ensemble_edges(const std::vector<std::vector<EdgeRecord>>& runs,
                                       const EnsembleSpec& spec);

struct RunNetwork {
  std::vector<std::size_t> components;
  std::vector<std::size_t> genes;
  std::vector<EdgeRecord> edges;  // every tested pair with its probability
  EdgeModelFit model;
};

// Covariance over the union of loading supports of the chosen components,
// partial correlations and edge probabilities for every gene pair.
RunNetwork run_network(const FittedModel& model, const std::vector<std::size_t>& components,
                       double support_eps, const EdgeModelOptions& options = {});

}  // namespace bicmix::network

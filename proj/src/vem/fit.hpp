#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "core/types.hpp"
#include "random/rng.hpp"

namespace bicmix::vem {

// Numerators of the gamma-conditional rate updates (delta, rho, tau, kappa,
// eta, chi, gamma, varphi): shape - 1 for the mode, shape for the mean.
enum class RateUpdate { Mode, Mean };

struct FitConfig {
  std::size_t k_init = 50;
  std::size_t max_iterations = 5000;
  std::uint64_t seed = 0;
  double prune_eps = 1e-10;
  double converge_tol = 1e-6;
  double classification_threshold = 0.9;
  std::size_t warm_start_iterations = 100;
  double support_eps = 0.0;  // entries with |v| > support_eps count as nonzero
  RateUpdate rate_update = RateUpdate::Mode;

  void validate() const;
};

struct IterationTrace {
  std::size_t iteration = 0;  // 1-based sweep index
  std::vector<std::size_t> component_ids;
  std::vector<std::size_t> n_genes;
  std::vector<std::size_t> n_samples;
  double residual_norm = 0.0;  // ||Y - Lambda <X>||_F
  std::size_t active = 0;
};

struct FitProgress {
  ModelState state;
  Rng rng;
  std::size_t iteration = 0;  // completed sweeps
  std::vector<IterationTrace> trace;
  std::optional<std::size_t> converged_at;
  bool hyper_warning = false;  // some gamma-mode numerator was negative
};

// Draws the initial state and runs the warm-start chain.
FitProgress start_fit(const DataMatrix& data, const Hyperparameters& hyper,
                      const FitConfig& config);

// Runs sweeps until progress.iteration == until. on_sweep is called after each
// sweep and trace entry. Numerical failures are rethrown with the sweep index.
void continue_fit(FitProgress& progress, const DataMatrix& data, const Hyperparameters& hyper,
                  const FitConfig& config, std::size_t until,
                  const std::function<void(const FitProgress&)>& on_sweep = {});

// One sweep in the order loading block, factor block, noise. Returns true when a
// gamma-mode numerator was negative.
bool vem_sweep(ModelState& state, const MatrixXd& y, const Hyperparameters& hyper,
               RateUpdate rate_update = RateUpdate::Mode);

IterationTrace trace_entry(const ModelState& state, const MatrixXd& y, std::size_t iteration,
                           double support_eps);

FitProgress fit(const DataMatrix& data, const Hyperparameters& hyper, const FitConfig& config);

}  // namespace bicmix::vem

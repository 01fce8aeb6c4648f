#pragma once

#include <functional>
#include <string>
#include <vector>

#include "app/options.hpp"
#include "core/types.hpp"
#include "vem/fit.hpp"

namespace bicmix::app {

struct CommandResult {
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;  // paths written
};

// Called after every completed sweep of a fit with (iteration, target).
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

std::vector<std::string> command_names();

// Fit settings from option keys (a..f, nu, a-x.., k, iterations, seed, ...);
// validated, UsageError on bad values.
Hyperparameters hyperparameters_from(const Options& options);
vem::FitConfig fit_config_from(const Options& options);

// Runs one of simulate, fit, score, network, normalize. Every command writes a
// manifest next to its outputs (manifest.json inside output directories,
// <out>.manifest.json beside single-file outputs).
CommandResult run_command(const std::string& command, const Options& options,
                          const ProgressFn& progress = {});

// Repeats the command recorded in a manifest after checking that every input
// still has its recorded digest. A non-empty out_override replaces the output
// location.
CommandResult rerun_manifest(const std::string& manifest_path, const std::string& out_override,
                             const ProgressFn& progress = {});

}  // namespace bicmix::app

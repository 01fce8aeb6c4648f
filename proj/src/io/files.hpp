#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"
#include "network/network.hpp"
#include "sim/simulator.hpp"
#include "vem/fit.hpp"

namespace bicmix::io {

// Column/row label of a component with stable id k ("c<k>") and its inverse.
std::string component_label(std::size_t id);
std::size_t parse_component_label(const std::string& label, const std::string& where);

struct ComponentRow {
  std::size_t id = 0;
  ComponentClass cls;
  double pve = 0.0;
  std::size_t n_genes = 0;
  std::size_t n_samples = 0;
};

std::vector<ComponentRow> summarize_components(const ModelState& state, double threshold,
                                               double support_eps);

// Files of a finished fit: lambda.tsv, x.tsv, components.tsv, psi.tsv,
// x_cov_sum.tsv, x_cov_trace.tsv, trace.tsv. The manifest is written separately.
void write_fit_dir(const std::string& dir, const vem::FitProgress& progress,
                   const DataMatrix& data, const std::vector<ComponentRow>& rows);

struct FitDir {
  network::FittedModel model;
  std::vector<vem::IterationTrace> trace;
  std::vector<ComponentRow> components;
};

// Reads a fit directory back; DataError on missing files or inconsistent shapes.
FitDir read_fit_dir(const std::string& dir);

std::string format_trace(const std::vector<vem::IterationTrace>& trace);
std::vector<vem::IterationTrace> read_trace(const std::string& path);

// y.tsv, truth_lambda.tsv, truth_x.tsv, truth_components.tsv.
void write_sim_dir(const std::string& dir, const DataMatrix& data, const sim::GroundTruth& truth);

struct SimDir {
  DataMatrix data;
  sim::GroundTruth truth;
};
SimDir read_sim_dir(const std::string& dir);

// Header gene_a gene_b pcor prob replication; written even when edges is empty.
void write_edges(const std::string& path, const std::vector<network::EdgeRecord>& edges);
std::vector<network::EdgeRecord> read_edges(const std::string& path);
// Undirected graph with replication as the weight attribute.
void write_dot(const std::string& path, const std::vector<network::EdgeRecord>& edges);

}  // namespace bicmix::io

#include "app/commands.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <set>

#include "json.hpp"

#include "core/error.hpp"
#include "io/checkpoint.hpp"
#include "io/digest.hpp"
#include "io/files.hpp"
#include "io/normalize.hpp"
#include "io/tsv.hpp"
#include "metrics/metrics.hpp"
#include "network/network.hpp"
#include "sim/simulator.hpp"
#include "vem/fit.hpp"

namespace bicmix::app {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kManifestVersion = 1;
constexpr const char* kLibraryVersion = "1.0.0";

// Keys holding file system paths; recorded in absolute form.
const std::set<std::string> kPathKeys = {"input", "out", "truth", "fit", "labels", "dot",
                                         "checkpoint", "resume"};
// Keys that change how a fit is executed but not what it computes.
const std::set<std::string> kExecutionOnlyKeys = {"checkpoint", "checkpoint-every", "resume"};

std::string absolute(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal().string(); }

Options with_absolute_paths(const Options& in) {
  Options out;
  for (const auto& [key, values] : in.entries())
    for (const auto& v : values) out.add(key, kPathKeys.count(key) && !v.empty() ? absolute(v) : v);
  return out;
}

json options_json(const Options& o) {
  json j = json::object();
  for (const auto& [key, values] : o.entries()) {
    if (kExecutionOnlyKeys.count(key)) continue;
    j[key] = values;
  }
  return j;
}

struct Context {
  std::string command;
  Options options;  // absolute paths
  const ProgressFn* progress = nullptr;
  CommandResult result;
  json manifest;
  json inputs = json::array();

  void input(const std::string& path) {
    inputs.push_back({{"path", absolute(path)}, {"sha256", io::sha256_file(path)}});
  }
  void warn(const std::string& w) { result.warnings.push_back(w); }
  void output(const std::string& p) { result.outputs.push_back(p); }
};

}  // namespace

Hyperparameters hyperparameters_from(const Options& o) {
  Hyperparameters h;
  h.a = o.real("a", h.a);
  h.b = o.real("b", h.b);
  h.c = o.real("c", h.c);
  h.d = o.real("d", h.d);
  h.e = o.real("e", h.e);
  h.f = o.real("f", h.f);
  h.nu = o.real("nu", h.nu);
  h.a_x = o.real("a-x", h.a_x);
  h.b_x = o.real("b-x", h.b_x);
  h.c_x = o.real("c-x", h.c_x);
  h.d_x = o.real("d-x", h.d_x);
  h.e_x = o.real("e-x", h.e_x);
  h.f_x = o.real("f-x", h.f_x);
  h.xi = o.real("xi", h.xi);
  h.alpha = o.real("alpha", h.alpha);
  h.beta = o.real("beta", h.beta);
  h.alpha_x = o.real("alpha-x", h.alpha_x);
  h.beta_x = o.real("beta-x", h.beta_x);
  h.validate();
  return h;
}

namespace {

json hyper_json(const Hyperparameters& h) {
  return {{"a", h.a},         {"b", h.b},         {"c", h.c},          {"d", h.d},
          {"e", h.e},         {"f", h.f},         {"nu", h.nu},        {"a_x", h.a_x},
          {"b_x", h.b_x},     {"c_x", h.c_x},     {"d_x", h.d_x},      {"e_x", h.e_x},
          {"f_x", h.f_x},     {"xi", h.xi},       {"alpha", h.alpha},  {"beta", h.beta},
          {"alpha_x", h.alpha_x}, {"beta_x", h.beta_x}};
}

}  // namespace

vem::FitConfig fit_config_from(const Options& o) {
  vem::FitConfig c;
  c.k_init = o.count("k", c.k_init);
  c.max_iterations = o.count("iterations", c.max_iterations);
  c.seed = o.u64("seed", c.seed);
  c.warm_start_iterations = o.count("warm-start", c.warm_start_iterations);
  c.classification_threshold = o.real("threshold", c.classification_threshold);
  c.prune_eps = o.real("prune-eps", c.prune_eps);
  c.converge_tol = o.real("converge-tol", c.converge_tol);
  c.support_eps = o.real("support-eps", c.support_eps);
  const std::string rate = o.str("rate-update", "mode");
  if (rate == "mode")
    c.rate_update = vem::RateUpdate::Mode;
  else if (rate == "mean")
    c.rate_update = vem::RateUpdate::Mean;
  else
    throw UsageError("rate-update must be 'mode' or 'mean', got '" + rate + "'");
  c.validate();
  return c;
}

namespace {

json config_json(const vem::FitConfig& c) {
  return {{"k_init", c.k_init},
          {"max_iterations", c.max_iterations},
          {"seed", c.seed},
          {"warm_start_iterations", c.warm_start_iterations},
          {"classification_threshold", c.classification_threshold},
          {"prune_eps", c.prune_eps},
          {"converge_tol", c.converge_tol},
          {"support_eps", c.support_eps},
          {"rate_update", c.rate_update == vem::RateUpdate::Mean ? "mean" : "mode"}};
}

// Differences that make a checkpoint unusable for the requested run.
std::vector<std::string> config_mismatches(const vem::FitConfig& a, const vem::FitConfig& b) {
  std::vector<std::string> out;
  if (a.k_init != b.k_init) out.push_back("k");
  if (a.seed != b.seed) out.push_back("seed");
  if (a.warm_start_iterations != b.warm_start_iterations) out.push_back("warm-start");
  if (a.prune_eps != b.prune_eps) out.push_back("prune-eps");
  if (a.converge_tol != b.converge_tol) out.push_back("converge-tol");
  if (a.support_eps != b.support_eps) out.push_back("support-eps");
  if (a.rate_update != b.rate_update) out.push_back("rate-update");
  if (a.classification_threshold != b.classification_threshold) out.push_back("threshold");
  return out;
}

std::string file_beside(const std::string& out, const char* suffix) { return out + suffix; }

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ---- simulate -------------------------------------------------------------

void cmd_simulate(Context& ctx) {
  const Options& o = ctx.options;
  const std::string out = o.required("out");
  const std::string preset = o.str("preset", "sim1-ln");
  sim::SimConfig c = sim::preset(preset);
  c.seed = o.u64("seed", c.seed);
  c.p = o.count("p", c.p);
  c.n = o.count("n", c.n);
  c.k_sparse = o.count("k-sparse", c.k_sparse);
  c.k_dense = o.count("k-dense", c.k_dense);
  c.m_min = o.count("m-min", c.m_min);
  c.m_max = o.count("m-max", c.m_max);
  c.max_shared = o.count("max-shared", c.max_shared);
  c.value_sd = o.real("value-sd", c.value_sd);
  c.noise_var = o.real("noise-var", c.noise_var);
  c.shuffle_pairing = o.flag("shuffle-pairing", c.shuffle_pairing);
  o.reject_unused(ctx.command);
  c.validate();

  auto [data, truth] = sim::simulate(c);
  io::write_sim_dir(out, data, truth);
  for (const char* f : {"y.tsv", "truth_lambda.tsv", "truth_x.tsv", "truth_components.tsv"})
    ctx.output((fs::path(out) / f).string());
  ctx.manifest["run_id"] = o.str("run-id", preset + "-seed" + std::to_string(c.seed));
  ctx.manifest["seed"] = c.seed;
  ctx.manifest["simulation"] = {{"preset", preset},       {"p", c.p},
                                {"n", c.n},                {"k_sparse", c.k_sparse},
                                {"k_dense", c.k_dense},    {"m_min", c.m_min},
                                {"m_max", c.m_max},        {"max_shared", c.max_shared},
                                {"value_sd", c.value_sd},  {"noise_var", c.noise_var},
                                {"shuffle_pairing", c.shuffle_pairing}};
  ctx.manifest["biclusters"] = truth.biclusters.size();
}

// ---- fit ------------------------------------------------------------------

void cmd_fit(Context& ctx) {
  const Options& o = ctx.options;
  const std::string input = o.required("input");
  const std::string out = o.required("out");
  const Hyperparameters hyper = hyperparameters_from(o);
  const vem::FitConfig config = fit_config_from(o);
  const std::string checkpoint = o.str("checkpoint", "");
  const std::size_t every = o.count("checkpoint-every", 0);
  const std::string resume = o.str("resume", "");
  const std::string run_id = o.str("run-id", "fit-seed" + std::to_string(config.seed));
  o.reject_unused(ctx.command);
  if (every > 0 && checkpoint.empty())
    throw UsageError("checkpoint-every needs a checkpoint path");

  const DataMatrix data = io::read_data_matrix(input);
  ctx.input(input);
  const std::string fingerprint = io::data_fingerprint(data);

  vem::FitProgress progress;
  json resumed = nullptr;
  if (!resume.empty()) {
    io::Checkpoint cp = io::load_checkpoint(resume);
    if (cp.data_digest != fingerprint)
      throw DataError(resume + ": checkpoint was taken on a different data matrix");
    if (!(cp.hyper == hyper)) throw UsageError(resume + ": hyperparameters differ from the checkpoint");
    const auto diff = config_mismatches(cp.config, config);
    if (!diff.empty()) {
      std::string keys;
      for (const auto& d : diff) keys += (keys.empty() ? "" : ", ") + d;
      throw UsageError(resume + ": settings differ from the checkpoint (" + keys + ")");
    }
    if (cp.progress.iteration > config.max_iterations)
      throw UsageError(resume + ": checkpoint is at iteration " +
                       std::to_string(cp.progress.iteration) + ", beyond --iterations");
    progress = std::move(cp.progress);
    resumed = {{"path", absolute(resume)}, {"iteration", progress.iteration}};
  } else {
    progress = vem::start_fit(data, hyper, config);
  }

  const auto started = std::chrono::steady_clock::now();
  auto save = [&] {
    if (checkpoint.empty()) return;
    ensure_parent(checkpoint);
    io::save_checkpoint(checkpoint, io::Checkpoint{progress, hyper, config, fingerprint});
  };
  const std::size_t target = config.max_iterations;
  std::function<void(const vem::FitProgress&)> on_sweep;
  if (ctx.progress && *ctx.progress)
    on_sweep = [&](const vem::FitProgress& p) { (*ctx.progress)(p.iteration, target); };
  while (progress.iteration < target) {
    std::size_t until = target;
    if (every > 0) until = std::min(target, (progress.iteration / every + 1) * every);
    vem::continue_fit(progress, data, hyper, config, until, on_sweep);
    if (every > 0) save();
  }
  save();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (progress.hyper_warning)
    ctx.warn("some gamma-mode numerators were negative; the affected scales were floored");

  const auto rows =
      io::summarize_components(progress.state, config.classification_threshold, config.support_eps);
  io::write_fit_dir(out, progress, data, rows);
  for (const char* f : {"lambda.tsv", "x.tsv", "components.tsv", "psi.tsv", "x_cov_sum.tsv",
                        "x_cov_trace.tsv", "trace.tsv"})
    ctx.output((fs::path(out) / f).string());

  std::map<std::string, std::size_t> summary = {{"SS", 0}, {"SD", 0}, {"DS", 0}, {"DD", 0}};
  std::size_t ambiguous = 0;
  json table = json::array();
  for (const auto& r : rows) {
    ++summary[to_string(r.cls.cls)];
    if (r.cls.ambiguous()) ++ambiguous;
    table.push_back({{"component", io::component_label(r.id)},
                     {"class", to_string(r.cls.cls)},
                     {"pve", std::isfinite(r.pve) ? json(r.pve) : json(nullptr)}});
  }
  ctx.manifest["run_id"] = run_id;
  ctx.manifest["seed"] = config.seed;
  ctx.manifest["hyperparameters"] = hyper_json(hyper);
  ctx.manifest["config"] = config_json(config);
  ctx.manifest["data_fingerprint"] = fingerprint;
  ctx.manifest["iterations"] = progress.iteration;
  ctx.manifest["converged_at"] =
      progress.converged_at ? json(*progress.converged_at) : json(nullptr);
  ctx.manifest["components"] = rows.size();
  ctx.manifest["classification"] = {{"SS", summary["SS"]}, {"SD", summary["SD"]},
                                    {"DS", summary["DS"]}, {"DD", summary["DD"]},
                                    {"ambiguous", ambiguous}};
  ctx.manifest["pve"] = table;
  ctx.manifest["resumed_from"] = resumed;
  ctx.manifest["fit_seconds"] = seconds;
}

// ---- score ----------------------------------------------------------------

void cmd_score(Context& ctx) {
  const Options& o = ctx.options;
  const std::string truth_dir = o.required("truth");
  const auto fits = o.list("fit");
  const std::string out = o.required("out");
  const double threshold = o.real("threshold", 0.9);
  const double eps = o.real("support-eps", 0.0);
  const std::string mode = o.str("mode", "both");
  const std::string run_id_opt = o.str("run-id", "");
  o.reject_unused(ctx.command);
  if (fits.size() != 1) throw UsageError("score takes exactly one fit directory");
  if (mode != "both" && mode != "cells" && mode != "genes")
    throw UsageError("mode must be cells, genes or both, got '" + mode + "'");
  if (!(threshold > 0.5 && threshold <= 1.0))
    throw UsageError("threshold must lie in (0.5, 1]");

  const io::SimDir sd = io::read_sim_dir(truth_dir);
  for (const char* f : {"y.tsv", "truth_lambda.tsv", "truth_x.tsv", "truth_components.tsv"})
    ctx.input((fs::path(truth_dir) / f).string());
  const io::FitDir fd = io::read_fit_dir(fits[0]);
  for (const char* f : {"lambda.tsv", "x.tsv", "components.tsv", "psi.tsv", "x_cov_sum.tsv", "trace.tsv"})
    ctx.input((fs::path(fits[0]) / f).string());
  const auto& m = fd.model;
  if (m.gene_ids != sd.data.gene_ids) throw DataError("fit genes do not match the truth genes");
  if (m.sample_ids != sd.data.sample_ids)
    throw DataError("fit samples do not match the truth samples");

  const std::string run_id =
      run_id_opt.empty() ? fs::path(fits[0]).lexically_normal().filename().string() : run_id_opt;
  const auto found =
      metrics::extract_biclusters(m.lambda, m.x_mean, m.z, m.o, threshold, eps, run_id);

  io::Table t;
  t.header = {"run_id", "metric", "value"};
  auto row = [&](const std::string& metric, double v) {
    t.rows.push_back({run_id, metric, io::format_double(v)});
  };
  for (auto jm : {metrics::JaccardMode::Cells, metrics::JaccardMode::Genes}) {
    const std::string name = metrics::to_string(jm);
    if (mode != "both" && mode != name) continue;
    const auto s = metrics::recovery_relevance(sd.truth.biclusters, found, jm);
    row("recovery_" + name, s.recovery);
    row("relevance_" + name, s.relevance);
  }

  std::vector<Eigen::Index> truth_l, truth_x, est_l, est_x;
  for (Eigen::Index k = 0; k < sd.truth.lambda.cols(); ++k) {
    if (sd.truth.loading_sparse[static_cast<std::size_t>(k)]) truth_l.push_back(k);
    if (sd.truth.factor_sparse[static_cast<std::size_t>(k)]) truth_x.push_back(k);
  }
  for (Eigen::Index k = 0; k < m.lambda.cols(); ++k) {
    const auto c = classify_component(m.z(k), m.o(k), threshold);
    if (c.loading() == Sparsity::Sparse) est_l.push_back(k);
    if (c.factor() == Sparsity::Sparse) est_x.push_back(k);
  }
  auto stability = [&](const MatrixXd& a, const std::vector<Eigen::Index>& ca, const MatrixXd& b,
                       const std::vector<Eigen::Index>& cb, const std::string& name) {
    if (ca.empty() || cb.empty()) {
      ctx.warn(name + " undefined: no sparse components on one side");
      row(name, std::numeric_limits<double>::quiet_NaN());
      return;
    }
    row(name, metrics::stability_index(a(Eigen::all, ca), b(Eigen::all, cb)));
  };
  stability(sd.truth.lambda, truth_l, m.lambda, est_l, "stability_loadings");
  const MatrixXd tx = sd.truth.x.transpose();
  const MatrixXd ex = m.x_mean.transpose();
  stability(tx, truth_x, ex, est_x, "stability_factors");
  row("n_truth", static_cast<double>(sd.truth.biclusters.size()));
  row("n_found", static_cast<double>(found.size()));
  row("redundancy", static_cast<double>(metrics::redundancy_count(found)));

  ensure_parent(out);
  io::write_file_atomic(out, io::format_table(t));
  ctx.output(out);
  ctx.manifest["run_id"] = run_id;
}

// ---- network --------------------------------------------------------------

void cmd_network(Context& ctx) {
  const Options& o = ctx.options;
  const auto fits = o.list("fit");
  const std::string out = o.required("out");
  const std::string dot = o.str("dot", "");
  const std::string labels_path = o.str("labels", "");
  network::SelectionSpec spec;
  spec.net_type = network::net_type_from_string(o.str("net-type", "ubiquitous"));
  spec.target_class = o.str("target-class", "");
  const std::string pair = o.str("class-pair", "");
  spec.wilcoxon_p_threshold = o.real("wilcoxon-p", spec.wilcoxon_p_threshold);
  const std::string values = o.str("wilcoxon-values", "nonzero");
  spec.support_eps = o.real("support-eps", 0.0);
  network::EnsembleSpec ens;
  ens.edge_prob_threshold = o.real("edge-prob", ens.edge_prob_threshold);
  ens.replication_threshold = o.count("replication", ens.replication_threshold);
  network::StabilityWindow window;
  const std::size_t stab_a = o.count("stability-a", 0);
  const std::size_t stab_b = o.count("stability-b", 0);
  window.max_change = o.count("stability-max-change", window.max_change);
  const std::string rule = o.str("stability-rule", "or");
  network::EdgeModelOptions edge_opts;
  edge_opts.central_quantile = o.real("null-quantile", edge_opts.central_quantile);
  edge_opts.min_edges = o.count("min-edges", edge_opts.min_edges);
  edge_opts.fallback_abs_threshold = o.real("fallback-threshold", edge_opts.fallback_abs_threshold);
  o.reject_unused(ctx.command);

  if (fits.empty()) throw UsageError("network needs at least one fit directory");
  if (values == "nonzero")
    spec.values = network::WilcoxonValues::NonZero;
  else if (values == "all")
    spec.values = network::WilcoxonValues::All;
  else
    throw UsageError("wilcoxon-values must be 'nonzero' or 'all'");
  if (rule == "or")
    window.rule = network::StabilityRule::Or;
  else if (rule == "and")
    window.rule = network::StabilityRule::And;
  else
    throw UsageError("stability-rule must be 'or' or 'and'");
  if (spec.net_type == network::NetType::SubsetSpecific && spec.target_class.empty())
    throw UsageError("a subset-specific network needs target-class");
  if (spec.net_type == network::NetType::SubsetDifferential) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == pair.size())
      throw UsageError("a subset-differential network needs class-pair A,B");
    spec.class_a = pair.substr(0, comma);
    spec.class_b = pair.substr(comma + 1);
    if (spec.class_a == spec.class_b) throw UsageError("class-pair needs two different labels");
  }
  if (spec.net_type != network::NetType::Ubiquitous && labels_path.empty())
    throw UsageError("this network type needs a labels file");
  if (!(spec.wilcoxon_p_threshold > 0.0 && spec.wilcoxon_p_threshold <= 1.0))
    throw UsageError("wilcoxon-p must lie in (0, 1]");
  if (!(ens.edge_prob_threshold >= 0.0 && ens.edge_prob_threshold <= 1.0))
    throw UsageError("edge-prob must lie in [0, 1]");
  if (ens.replication_threshold < 1) throw UsageError("replication must be at least 1");
  if (!(edge_opts.central_quantile > 0.0 && edge_opts.central_quantile < 1.0))
    throw UsageError("null-quantile must lie in (0, 1)");
  if (fits.size() < ens.replication_threshold)
    ctx.warn("only " + std::to_string(fits.size()) + " fit(s) given but replication threshold is " +
             std::to_string(ens.replication_threshold) + "; no edge can qualify");

  std::vector<std::vector<network::EdgeRecord>> runs;
  json per_run = json::array();
  for (const auto& dir : fits) {
    const io::FitDir fd = io::read_fit_dir(dir);
    for (const char* f : {"lambda.tsv", "x.tsv", "components.tsv", "psi.tsv", "x_cov_sum.tsv", "trace.tsv"})
      ctx.input((fs::path(dir) / f).string());
    std::vector<std::string> labels(fd.model.sample_ids.size());
    if (!labels_path.empty()) labels = io::read_labels(labels_path, fd.model.sample_ids);
    if (fd.trace.empty()) throw DataError(dir + ": trace.tsv has no iterations");
    network::StabilityWindow w = window;
    w.checkpoint_b = stab_b ? stab_b : fd.trace.back().iteration;
    w.checkpoint_a = stab_a ? stab_a : w.checkpoint_b / 2;
    const auto stable = network::stability_filter(fd.trace, w);
    const auto candidates = network::positions_of(fd.model, stable);
    const auto sel = network::select_components(fd.model, labels, spec, candidates);
    for (const auto& msg : sel.warnings) ctx.warn(dir + ": " + msg);
    json info = {{"fit", absolute(dir)},
                 {"window", {w.checkpoint_a, w.checkpoint_b}},
                 {"stable", stable.size()}};
    json chosen = json::array();
    for (auto c : sel.components) chosen.push_back(io::component_label(fd.model.component_ids[c]));
    info["selected"] = chosen;
    if (sel.components.empty()) {
      runs.emplace_back();
      per_run.push_back(info);
      continue;
    }
    auto rn = network::run_network(fd.model, sel.components, spec.support_eps, edge_opts);
    info["genes"] = rn.genes.size();
    info["tested_edges"] = rn.edges.size();
    info["fallback"] = rn.model.fallback;
    info["kappa"] = rn.model.kappa;
    info["eta0"] = rn.model.eta0;
    if (rn.model.fallback)
      ctx.warn(dir + ": fewer than " + std::to_string(edge_opts.min_edges) +
               " tested edges; using the absolute partial correlation threshold");
    runs.push_back(std::move(rn.edges));
    per_run.push_back(info);
  }
  const auto edges = network::ensemble_edges(runs, ens);
  ensure_parent(out);
  io::write_edges(out, edges);
  ctx.output(out);
  if (!dot.empty()) {
    ensure_parent(dot);
    io::write_dot(dot, edges);
    ctx.output(dot);
  }
  if (!labels_path.empty()) ctx.input(labels_path);
  ctx.manifest["run_id"] = o.str("run-id", fs::path(out).filename().string());
  ctx.manifest["net_type"] = network::to_string(spec.net_type);
  ctx.manifest["runs"] = per_run;
  ctx.manifest["edges"] = edges.size();
}

// ---- normalize ------------------------------------------------------------

void cmd_normalize(Context& ctx) {
  const Options& o = ctx.options;
  const std::string input = o.required("input");
  const std::string out = o.required("out");
  o.reject_unused(ctx.command);
  DataMatrix data = io::read_data_matrix(input);
  ctx.input(input);
  auto res = io::quantile_normalize(data.values);
  for (auto r : res.constant_rows)
    ctx.warn("gene '" + data.gene_ids[r] + "' (row " + std::to_string(r + 1) +
             ") is constant; its normalized values are zero");
  data.values = std::move(res.values);
  ensure_parent(out);
  io::write_data_matrix(out, data);
  ctx.output(out);
  ctx.manifest["run_id"] = fs::path(out).filename().string();
  ctx.manifest["constant_rows"] = res.constant_rows.size();
}

using Handler = void (*)(Context&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {{"simulate", cmd_simulate},
                                                   {"fit", cmd_fit},
                                                   {"score", cmd_score},
                                                   {"network", cmd_network},
                                                   {"normalize", cmd_normalize}};
  return h;
}

std::string manifest_path(const std::string& command, const std::string& out) {
  if (command == "simulate" || command == "fit") return (fs::path(out) / "manifest.json").string();
  return file_beside(out, ".manifest.json");
}

}  // namespace

std::vector<std::string> command_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : handlers()) names.push_back(name);
  return names;
}

CommandResult run_command(const std::string& command, const Options& options,
                          const ProgressFn& progress) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw UsageError("unknown command '" + command + "'");
  Context ctx;
  ctx.command = command;
  ctx.options = with_absolute_paths(options);
  ctx.progress = &progress;
  ctx.manifest["bicmix_manifest"] = kManifestVersion;
  ctx.manifest["library_version"] = kLibraryVersion;
  ctx.manifest["command"] = command;
  const auto started = std::chrono::steady_clock::now();
  it->second(ctx);
  ctx.manifest["options"] = options_json(ctx.options);
  ctx.manifest["inputs"] = ctx.inputs;
  json outputs = json::array();
  for (const auto& p : ctx.result.outputs) outputs.push_back(p);
  ctx.manifest["outputs"] = outputs;
  ctx.manifest["warnings"] = ctx.result.warnings;
  ctx.manifest["timing"] = {
      {"wall_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()}};
  const std::string path = manifest_path(command, ctx.options.str("out", ""));
  io::write_file_atomic(path, ctx.manifest.dump(2) + "\n");
  ctx.result.outputs.push_back(path);
  return ctx.result;
}

CommandResult rerun_manifest(const std::string& manifest_path_in, const std::string& out_override,
                             const ProgressFn& progress) {
  json m;
  try {
    m = json::parse(io::read_file(manifest_path_in));
  } catch (const json::exception& ex) {
    throw DataError(manifest_path_in + ": not a valid manifest (" + ex.what() + ")");
  }
  try {
    if (m.at("bicmix_manifest").get<int>() != kManifestVersion)
      throw DataError(manifest_path_in + ": unsupported manifest version");
    for (const auto& in : m.at("inputs")) {
      const auto path = in.at("path").get<std::string>();
      if (io::sha256_file(path) != in.at("sha256").get<std::string>())
        throw DataError("input '" + path + "' changed since the manifest was written");
    }
    Options opts;
    for (const auto& [key, values] : m.at("options").items())
      for (const auto& v : values) opts.add(key, v.get<std::string>());
    if (!out_override.empty()) {
      opts.set("out", out_override);
      if (opts.has("dot")) opts.set("dot", out_override + ".dot");
    }
    return run_command(m.at("command").get<std::string>(), opts, progress);
  } catch (const json::exception& ex) {
    throw DataError(manifest_path_in + ": malformed manifest (" + ex.what() + ")");
  }
}

}  // namespace bicmix::app

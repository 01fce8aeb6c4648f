#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bicmix/bicmix.h"

namespace {

struct Flag {
  std::string key;
  std::string help;
  std::string default_text;  // shown in --help only; the library owns defaults
};

struct Sub {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> single;
  std::map<std::string, std::vector<std::string>> multi;
};

void add_flags(Sub& sub, const std::vector<Flag>& flags) {
  for (const auto& f : flags) {
    auto* opt = sub.app->add_option("--" + f.key, sub.single[f.key], f.help);
    if (!f.default_text.empty()) opt->default_str(f.default_text);
  }
}

const std::vector<Flag> kHyperFlags = {
    {"a", "loading TPB shape a", "0.5"},       {"b", "loading TPB shape b", "0.5"},
    {"c", "loading TPB shape c", "0.5"},       {"d", "loading TPB shape d", "0.5"},
    {"e", "loading TPB shape e", "0.5"},       {"f", "loading TPB shape f", "0.5"},
    {"nu", "loading global rate", "1"},        {"a-x", "factor TPB shape a", "0.5"},
    {"b-x", "factor TPB shape b", "0.5"},      {"c-x", "factor TPB shape c", "0.5"},
    {"d-x", "factor TPB shape d", "0.5"},      {"e-x", "factor TPB shape e", "0.5"},
    {"f-x", "factor TPB shape f", "0.5"},      {"xi", "factor global rate", "1"},
    {"alpha", "loading mixing prior alpha", "1"}, {"beta", "loading mixing prior beta", "1"},
    {"alpha-x", "factor mixing prior alpha", "1"}, {"beta-x", "factor mixing prior beta", "1"},
};

void on_progress(size_t iteration, size_t target, void*) {
  if (iteration % 100 == 0 || iteration == target)
    std::fprintf(stderr, "iteration %zu/%zu\n", iteration, target);
}

int report(bicmix_status st) {
  for (size_t i = 0; i < bicmix_warning_count(); ++i)
    std::fprintf(stderr, "warning: %s\n", bicmix_warning(i));
  if (st != BICMIX_OK) std::fprintf(stderr, "error: %s\n", bicmix_last_error());
  return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Bayesian biclustering: simulate, fit, score, network, normalize"};
  app.set_version_flag("--version", std::string(bicmix_version()));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "report fit progress on stderr");

  std::map<std::string, Sub> subs;

  auto& simulate = subs["simulate"];
  simulate.app = app.add_subcommand("simulate", "simulate data with planted biclusters");
  add_flags(simulate, {{"out", "output directory", ""},
                       {"preset", "sim1-ln, sim1-hn, sim2-ln, sim2-hn or desk-*", "sim1-ln"},
                       {"seed", "random seed", "0"},
                       {"p", "genes", ""},
                       {"n", "samples", ""},
                       {"k-sparse", "sparse components", ""},
                       {"k-dense", "dense components per side", ""},
                       {"m-min", "smallest support", ""},
                       {"m-max", "largest support", ""},
                       {"max-shared", "support overlap cap", ""},
                       {"value-sd", "sd of nonzero entries", ""},
                       {"noise-var", "noise variance", ""},
                       {"shuffle-pairing", "pair sparse and dense sides at random", ""},
                       {"run-id", "identifier recorded in the manifest", ""}});

  auto& fit = subs["fit"];
  fit.app = app.add_subcommand("fit", "fit the model by variational EM");
  add_flags(fit, {{"input", "expression matrix TSV (genes x samples)", ""},
                  {"out", "output directory", ""},
                  {"k", "initial component count", "50"},
                  {"iterations", "VEM sweeps", "5000"},
                  {"seed", "random seed", "0"},
                  {"warm-start", "MCMC warm-start sweeps", "100"},
                  {"threshold", "classification threshold", "0.9"},
                  {"prune-eps", "pruning tolerance", "1e-10"},
                  {"converge-tol", "relative residual change reported as converged", "1e-6"},
                  {"support-eps", "entries with |v| above this count as nonzero", "0"},
                  {"rate-update", "mode or mean", "mode"},
                  {"checkpoint", "checkpoint file written during the fit", ""},
                  {"checkpoint-every", "sweeps between checkpoints", "0"},
                  {"resume", "checkpoint to resume from", ""},
                  {"run-id", "identifier recorded in the manifest", ""}});
  add_flags(fit, kHyperFlags);

  auto& score = subs["score"];
  score.app = app.add_subcommand("score", "score a fit against simulated truth");
  add_flags(score, {{"truth", "simulation directory", ""},
                    {"out", "metrics TSV", ""},
                    {"threshold", "classification threshold", "0.9"},
                    {"support-eps", "support tolerance", "0"},
                    {"mode", "cells, genes or both", "both"},
                    {"run-id", "run identifier in the output", ""}});
  score.app->add_option("--fit", score.multi["fit"], "fit directory")->required();

  auto& network = subs["network"];
  network.app = app.add_subcommand("network", "build gene networks from one or more fits");
  add_flags(network, {{"out", "edge list TSV", ""},
                      {"dot", "optional DOT export", ""},
                      {"labels", "sample labels TSV (sample_id, label)", ""},
                      {"net-type", "specific, differential or ubiquitous", "ubiquitous"},
                      {"target-class", "label for a subset-specific network", ""},
                      {"class-pair", "A,B labels for a subset-differential network", ""},
                      {"wilcoxon-p", "rank-sum p-value threshold", "1e-10"},
                      {"wilcoxon-values", "nonzero or all", "nonzero"},
                      {"edge-prob", "edge probability threshold", "0.8"},
                      {"replication", "runs an edge must reach", "10"},
                      {"stability-a", "first stability checkpoint", "half of the last"},
                      {"stability-b", "second stability checkpoint", "last iteration"},
                      {"stability-max-change", "largest allowed support change", "50"},
                      {"stability-rule", "or, and", "or"},
                      {"support-eps", "support tolerance", "0"},
                      {"null-quantile", "|pcor| quantile bounding the null fit", "0.75"},
                      {"min-edges", "fewest edges for the mixture fit", "50"},
                      {"fallback-threshold", "|pcor| cut used below min-edges", "0.2"},
                      {"run-id", "identifier recorded in the manifest", ""}});
  network.app->add_option("--fit", network.multi["fit"], "fit directories")->required();

  auto& normalize = subs["normalize"];
  normalize.app = app.add_subcommand("normalize", "per-gene normal quantile normalization");
  add_flags(normalize, {{"input", "expression matrix TSV", ""}, {"out", "output TSV", ""}});

  std::string manifest, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
  rerun->add_option("--manifest", manifest, "manifest.json of the run")->required();
  rerun->add_option("--out", rerun_out, "new output location");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : BICMIX_ERR_USAGE;
  }

  bicmix_progress_fn progress = verbose ? on_progress : nullptr;
  if (rerun->parsed()) return report(bicmix_rerun(manifest.c_str(), rerun_out.c_str(), progress, nullptr));

  for (auto& [name, sub] : subs) {
    if (!sub.app->parsed()) continue;
    bicmix_options* opts = nullptr;
    if (bicmix_options_create(&opts) != BICMIX_OK) return report(BICMIX_ERR_INTERNAL);
    for (const auto& [key, value] : sub.single)
      if (sub.app->get_option("--" + key)->count() > 0)
        bicmix_options_set(opts, key.c_str(), value.c_str());
    for (const auto& [key, values] : sub.multi)
      for (const auto& v : values) bicmix_options_add(opts, key.c_str(), v.c_str());
    const bicmix_status st = bicmix_run(name.c_str(), opts, progress, nullptr);
    bicmix_options_free(opts);
    return report(st);
  }
  return BICMIX_ERR_USAGE;
}

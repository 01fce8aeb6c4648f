#include "bicmix/bicmix.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "app/commands.hpp"
#include "app/options.hpp"
#include "core/error.hpp"
#include "io/checkpoint.hpp"
#include "io/normalize.hpp"
#include "io/tsv.hpp"
#include "vem/fit.hpp"

struct bicmix_options {
  bicmix::app::Options opts;
};

struct bicmix_matrix {
  bicmix::DataMatrix data;
};

struct bicmix_fit {
  const bicmix::DataMatrix* data = nullptr;
  bicmix::Hyperparameters hyper;
  bicmix::vem::FitConfig config;
  bicmix::vem::FitProgress progress;
  std::string fingerprint;
};

namespace {

thread_local std::string g_error;
thread_local std::vector<std::string> g_warnings;

template <typename F>
bicmix_status guard(F&& body) {
  g_error.clear();
  g_warnings.clear();
  try {
    body();
    return BICMIX_OK;
  } catch (const bicmix::Error& ex) {
    g_error = ex.what();
    return static_cast<bicmix_status>(ex.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& ex) {
    g_error = ex.what();
  } catch (...) {
    g_error = "unknown failure";
  }
  return BICMIX_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) throw bicmix::UsageError(std::string(what) + " must not be null");
}

bicmix::app::ProgressFn wrap(bicmix_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](std::size_t it, std::size_t target) { fn(it, target, user); };
}

void copy_out(const bicmix::MatrixXd& m, double* out) {
  need(out, "output buffer");
  std::memcpy(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void copy_out(const bicmix::VectorXd& v, double* out) {
  need(out, "output buffer");
  std::memcpy(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

}  // namespace

extern "C" {

const char* bicmix_version(void) { return "1.0.0"; }

const char* bicmix_last_error(void) { return g_error.c_str(); }

size_t bicmix_warning_count(void) { return g_warnings.size(); }

const char* bicmix_warning(size_t index) {
  return index < g_warnings.size() ? g_warnings[index].c_str() : "";
}

bicmix_status bicmix_options_create(bicmix_options** out) {
  return guard([&] {
    need(out, "out");
    *out = new bicmix_options();
  });
}

bicmix_status bicmix_options_set(bicmix_options* opts, const char* key, const char* value) {
  return guard([&] {
    need(opts, "options");
    need(key, "key");
    need(value, "value");
    opts->opts.set(key, value);
  });
}

bicmix_status bicmix_options_add(bicmix_options* opts, const char* key, const char* value) {
  return guard([&] {
    need(opts, "options");
    need(key, "key");
    need(value, "value");
    opts->opts.add(key, value);
  });
}

void bicmix_options_free(bicmix_options* opts) { delete opts; }

bicmix_status bicmix_run(const char* command, const bicmix_options* opts,
                         bicmix_progress_fn progress, void* user_data) {
  std::vector<std::string> warnings;
  const auto st = guard([&] {
    need(command, "command");
    need(opts, "options");
    warnings = bicmix::app::run_command(command, opts->opts, wrap(progress, user_data)).warnings;
  });
  g_warnings = std::move(warnings);
  return st;
}

bicmix_status bicmix_rerun(const char* manifest_path, const char* out_override,
                           bicmix_progress_fn progress, void* user_data) {
  std::vector<std::string> warnings;
  const auto st = guard([&] {
    need(manifest_path, "manifest path");
    warnings = bicmix::app::rerun_manifest(manifest_path, out_override ? out_override : "",
                                           wrap(progress, user_data))
                   .warnings;
  });
  g_warnings = std::move(warnings);
  return st;
}

bicmix_status bicmix_matrix_create(size_t rows, size_t cols, const double* values,
                                   bicmix_matrix** out) {
  return guard([&] {
    need(out, "out");
    need(values, "values");
    bicmix::MatrixXd m = Eigen::Map<const bicmix::MatrixXd>(
        values, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    auto h = std::make_unique<bicmix_matrix>();
    h->data = bicmix::DataMatrix::from_values(std::move(m));
    h->data.validate();
    *out = h.release();
  });
}

bicmix_status bicmix_matrix_read_tsv(const char* path, bicmix_matrix** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<bicmix_matrix>();
    h->data = bicmix::io::read_data_matrix(path);
    *out = h.release();
  });
}

bicmix_status bicmix_matrix_write_tsv(const bicmix_matrix* m, const char* path) {
  return guard([&] {
    need(m, "matrix");
    need(path, "path");
    bicmix::io::write_data_matrix(path, m->data);
  });
}

bicmix_status bicmix_matrix_shape(const bicmix_matrix* m, size_t* rows, size_t* cols) {
  return guard([&] {
    need(m, "matrix");
    if (rows) *rows = m->data.genes();
    if (cols) *cols = m->data.samples();
  });
}

bicmix_status bicmix_matrix_copy_values(const bicmix_matrix* m, double* out) {
  return guard([&] {
    need(m, "matrix");
    copy_out(m->data.values, out);
  });
}

bicmix_status bicmix_matrix_quantile_normalize(const bicmix_matrix* m, bicmix_matrix** out) {
  std::vector<std::string> warnings;
  const auto st = guard([&] {
    need(m, "matrix");
    need(out, "out");
    auto res = bicmix::io::quantile_normalize(m->data.values);
    auto h = std::make_unique<bicmix_matrix>();
    h->data = m->data;
    h->data.values = std::move(res.values);
    for (auto r : res.constant_rows)
      warnings.push_back("gene '" + m->data.gene_ids[r] + "' is constant; normalized to zero");
    *out = h.release();
  });
  g_warnings = std::move(warnings);
  return st;
}

void bicmix_matrix_free(bicmix_matrix* m) { delete m; }

bicmix_status bicmix_fit_start(const bicmix_matrix* data, const bicmix_options* opts,
                               bicmix_fit** out) {
  return guard([&] {
    need(data, "matrix");
    need(out, "out");
    bicmix::app::Options empty;
    const auto& o = opts ? opts->opts : empty;
    auto h = std::make_unique<bicmix_fit>();
    h->data = &data->data;
    h->hyper = bicmix::app::hyperparameters_from(o);
    h->config = bicmix::app::fit_config_from(o);
    o.reject_unused("fit");
    h->fingerprint = bicmix::io::data_fingerprint(data->data);
    h->progress = bicmix::vem::start_fit(data->data, h->hyper, h->config);
    *out = h.release();
  });
}

bicmix_status bicmix_fit_run(bicmix_fit* fit, size_t until_iteration) {
  return guard([&] {
    need(fit, "fit");
    if (until_iteration < fit->progress.iteration)
      throw bicmix::UsageError("cannot run a fit backwards");
    bicmix::vem::continue_fit(fit->progress, *fit->data, fit->hyper, fit->config, until_iteration);
  });
}

bicmix_status bicmix_fit_iteration(const bicmix_fit* fit, size_t* out) {
  return guard([&] {
    need(fit, "fit");
    need(out, "out");
    *out = fit->progress.iteration;
  });
}

bicmix_status bicmix_fit_components(const bicmix_fit* fit, size_t* out) {
  return guard([&] {
    need(fit, "fit");
    need(out, "out");
    *out = fit->progress.state.components();
  });
}

bicmix_status bicmix_fit_copy_loadings(const bicmix_fit* fit, double* out) {
  return guard([&] {
    need(fit, "fit");
    copy_out(fit->progress.state.loading.lambda, out);
  });
}

bicmix_status bicmix_fit_copy_factors(const bicmix_fit* fit, double* out) {
  return guard([&] {
    need(fit, "fit");
    copy_out(fit->progress.state.factor.x_mean, out);
  });
}

bicmix_status bicmix_fit_copy_indicators(const bicmix_fit* fit, double* z, double* o) {
  return guard([&] {
    need(fit, "fit");
    copy_out(fit->progress.state.loading.z, z);
    copy_out(fit->progress.state.factor.o, o);
  });
}

bicmix_status bicmix_fit_copy_noise(const bicmix_fit* fit, double* psi) {
  return guard([&] {
    need(fit, "fit");
    copy_out(fit->progress.state.noise.psi, psi);
  });
}

bicmix_status bicmix_fit_save_checkpoint(const bicmix_fit* fit, const char* path) {
  return guard([&] {
    need(fit, "fit");
    need(path, "path");
    bicmix::io::save_checkpoint(
        path, bicmix::io::Checkpoint{fit->progress, fit->hyper, fit->config, fit->fingerprint});
  });
}

bicmix_status bicmix_fit_load_checkpoint(const char* path, const bicmix_matrix* data,
                                         bicmix_fit** out) {
  return guard([&] {
    need(path, "path");
    need(data, "matrix");
    need(out, "out");
    auto cp = bicmix::io::load_checkpoint(path);
    auto h = std::make_unique<bicmix_fit>();
    h->fingerprint = bicmix::io::data_fingerprint(data->data);
    if (h->fingerprint != cp.data_digest)
      throw bicmix::DataError(std::string(path) + ": checkpoint was taken on a different matrix");
    h->data = &data->data;
    h->hyper = cp.hyper;
    h->config = cp.config;
    h->progress = std::move(cp.progress);
    *out = h.release();
  });
}

void bicmix_fit_free(bicmix_fit* fit) { delete fit; }

}  // extern "C"

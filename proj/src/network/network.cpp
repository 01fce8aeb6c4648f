#include "network/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/minima.hpp>

#include "core/error.hpp"

namespace bicmix::network {

namespace {

const vem::IterationTrace& find_checkpoint(const std::vector<vem::IterationTrace>& trace,
                                           std::size_t iteration) {
  for (const auto& t : trace)
    if (t.iteration == iteration) return t;
  std::ostringstream os;
  os << "trace has no entry for checkpoint iteration " << iteration;
  throw DataError(os.str());
}

std::size_t abs_diff(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

// Midranks (1-based) of the pooled sample and the tie-correction sum of t^3 - t.
std::pair<std::vector<double>, double> midranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  double ties = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  return {rank, ties};
}

// counts[s] = number of size-m subsets of {1..n} with sum s.
std::vector<double> subset_sum_counts(std::size_t n, std::size_t m) {
  const std::size_t max_sum = n * (n + 1) / 2;
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(max_sum + 1, 0.0));
  c[0][0] = 1.0;
  for (std::size_t v = 1; v <= n; ++v)
    for (std::size_t k = std::min(m, v); k >= 1; --k)
      for (std::size_t s = max_sum; s >= v; --s) c[k][s] += c[k - 1][s - v];
  return c[m];
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Pool-adjacent-violators for a non-decreasing fit with weights.
std::vector<double> isotonic(const std::vector<double>& y, const std::vector<double>& w) {
  std::vector<double> val, wt;
  std::vector<std::size_t> len;
  for (std::size_t i = 0; i < y.size(); ++i) {
    val.push_back(y[i]);
    wt.push_back(w[i]);
    len.push_back(1);
    while (val.size() > 1 && val[val.size() - 2] > val.back()) {
      const std::size_t b = val.size() - 1;
      const double tw = wt[b - 1] + wt[b];
      val[b - 1] = (val[b - 1] * wt[b - 1] + val[b] * wt[b]) / tw;
      wt[b - 1] = tw;
      len[b - 1] += len[b];
      val.pop_back();
      wt.pop_back();
      len.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < val.size(); ++b) out.insert(out.end(), len[b], val[b]);
  return out;
}

}  // namespace

FittedModel FittedModel::from_state(const ModelState& state, const DataMatrix& data) {
  FittedModel m;
  m.lambda = state.loading.lambda;
  m.x_mean = state.factor.x_mean;
  m.x_cov_sum = state.x_cov_sum();
  m.psi = state.noise.psi;
  m.z = state.loading.z;
  m.o = state.factor.o;
  m.component_ids = state.component_ids;
  m.gene_ids = data.gene_ids;
  m.sample_ids = data.sample_ids;
  m.validate();
  return m;
}

void FittedModel::validate() const {
  const auto k = static_cast<Eigen::Index>(components());
  auto need = [](bool ok, const char* what) {
    if (!ok) throw DataError(std::string("fitted model shape mismatch: ") + what);
  };
  need(lambda.cols() == k, "loading columns vs component ids");
  need(x_mean.rows() == k, "factor rows vs component ids");
  need(x_cov_sum.rows() == k && x_cov_sum.cols() == k, "factor covariance size");
  need(z.size() == k && o.size() == k, "indicator length");
  need(psi.size() == lambda.rows(), "noise length vs genes");
  need(gene_ids.size() == static_cast<std::size_t>(lambda.rows()), "gene ids vs loading rows");
  need(sample_ids.size() == static_cast<std::size_t>(x_mean.cols()), "sample ids vs factor columns");
}

std::vector<std::size_t> stability_filter(const std::vector<vem::IterationTrace>& trace,
                                          const StabilityWindow& window) {
  if (window.checkpoint_a >= window.checkpoint_b)
    throw UsageError("stability window needs checkpoint_a < checkpoint_b");
  const auto& a = find_checkpoint(trace, window.checkpoint_a);
  const auto& b = find_checkpoint(trace, window.checkpoint_b);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < b.component_ids.size(); ++k) {
    const auto it = std::find(a.component_ids.begin(), a.component_ids.end(), b.component_ids[k]);
    if (it == a.component_ids.end()) continue;
    const auto ka = static_cast<std::size_t>(it - a.component_ids.begin());
    const bool genes_moved = abs_diff(a.n_genes[ka], b.n_genes[k]) > window.max_change;
    const bool samples_moved = abs_diff(a.n_samples[ka], b.n_samples[k]) > window.max_change;
    const bool unstable = window.rule == StabilityRule::Or ? (genes_moved || samples_moved)
                                                           : (genes_moved && samples_moved);
    if (!unstable) keep.push_back(b.component_ids[k]);
  }
  return keep;
}

std::vector<std::size_t> positions_of(const FittedModel& model,
                                      const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> pos;
  for (std::size_t c = 0; c < model.components(); ++c)
    if (std::find(ids.begin(), ids.end(), model.component_ids[c]) != ids.end()) pos.push_back(c);
  return pos;
}

double wilcoxon_rank_sum(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw UsageError("rank-sum test needs two non-empty samples");
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto [rank, ties] = midranks(pooled);
  const std::size_t m = x.size();
  const std::size_t total = pooled.size();
  double w = 0.0;
  for (std::size_t i = 0; i < m; ++i) w += rank[i];

  if (total <= 12 && ties == 0.0) {
    const auto counts = subset_sum_counts(total, m);
    const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto ws = static_cast<std::size_t>(std::llround(w));
    double lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s <= ws) lower += counts[s];
      if (s >= ws) upper += counts[s];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
  }

  const double nm = static_cast<double>(m);
  const double nn = static_cast<double>(total - m);
  const double nt = static_cast<double>(total);
  const double mean = nm * (nt + 1.0) / 2.0;
  const double var = nm * nn / 12.0 * ((nt + 1.0) - ties / (nt * (nt - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

NetType net_type_from_string(const std::string& s) {
  if (s == "specific" || s == "subset_specific") return NetType::SubsetSpecific;
  if (s == "differential" || s == "subset_differential") return NetType::SubsetDifferential;
  if (s == "ubiquitous") return NetType::Ubiquitous;
  throw UsageError("unknown network type '" + s +
                   "' (expected specific, differential or ubiquitous)");
}

const char* to_string(NetType t) {
  switch (t) {
    case NetType::SubsetSpecific: return "specific";
    case NetType::SubsetDifferential: return "differential";
    case NetType::Ubiquitous: return "ubiquitous";
  }
  return "?";
}

Selection select_components(const FittedModel& model, const std::vector<std::string>& labels,
                            const SelectionSpec& spec,
                            const std::vector<std::size_t>& candidates) {
  const auto n = static_cast<std::size_t>(model.x_mean.cols());
  if (labels.size() != n) {
    std::ostringstream os;
    os << "label count " << labels.size() << " does not match sample count " << n;
    throw DataError(os.str());
  }
  Selection out;
  for (const std::size_t c : candidates) {
    if (c >= model.components()) throw UsageError("candidate component out of range");
    const VectorXd row = model.x_mean.row(static_cast<Eigen::Index>(c)).transpose();
    const auto supp = support(row, spec.support_eps);
    bool chosen = false;
    switch (spec.net_type) {
      case NetType::SubsetSpecific:
        chosen = !supp.empty() && std::all_of(supp.begin(), supp.end(), [&](std::size_t j) {
          return labels[j] == spec.target_class;
        });
        break;
      case NetType::Ubiquitous:
        chosen = supp.size() == n;
        break;
      case NetType::SubsetDifferential: {
        std::vector<double> xa, xb;
        for (std::size_t j = 0; j < n; ++j) {
          const double v = row(static_cast<Eigen::Index>(j));
          if (spec.values == WilcoxonValues::NonZero && !(std::abs(v) > spec.support_eps)) continue;
          if (labels[j] == spec.class_a) xa.push_back(v);
          if (labels[j] == spec.class_b) xb.push_back(v);
        }
        if (xa.size() < 2 || xb.size() < 2) {
          std::ostringstream os;
          os << "component " << model.component_ids[c] << " skipped: fewer than 2 values in class "
             << (xa.size() < 2 ? spec.class_a : spec.class_b);
          out.warnings.push_back(os.str());
          break;
        }
        chosen = wilcoxon_rank_sum(xa, xb) <= spec.wilcoxon_p_threshold;
        break;
      }
    }
    if (chosen) out.components.push_back(c);
  }
  std::sort(out.components.begin(), out.components.end());
  return out;
}

MatrixXd build_covariance(const MatrixXd& lambda_a, const MatrixXd& sigma_aa, const VectorXd& psi,
                          const std::vector<std::size_t>& gene_subset) {
  if (gene_subset.empty()) throw DataError("covariance needs a non-empty gene subset");
  if (sigma_aa.rows() != lambda_a.cols() || sigma_aa.cols() != lambda_a.cols())
    throw DataError("component covariance does not match the loading columns");
  if (psi.size() != lambda_a.rows()) throw DataError("noise variances do not match the gene count");
  const auto m = static_cast<Eigen::Index>(gene_subset.size());
  MatrixXd l(m, lambda_a.cols());
  VectorXd d(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto g = static_cast<Eigen::Index>(gene_subset[static_cast<std::size_t>(r)]);
    if (g >= lambda_a.rows()) throw DataError("gene subset index out of range");
    l.row(r) = lambda_a.row(g);
    d(r) = psi(g);
  }
  MatrixXd omega = l * sigma_aa * l.transpose();
  omega = (0.5 * (omega + omega.transpose())).eval();
  omega.diagonal() += d;
  return omega;
}

MatrixXd partial_correlations(const MatrixXd& omega) {
  Eigen::LLT<MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance is not positive definite", 0.0);
  const double rcond = llt.rcond();
  if (!(rcond > 0.0)) throw NumericalError("covariance is numerically singular", rcond);
  MatrixXd prec = llt.solve(MatrixXd::Identity(omega.rows(), omega.cols()));
  prec = (0.5 * (prec + prec.transpose())).eval();
  const VectorXd s = prec.diagonal().cwiseSqrt().cwiseInverse();
  MatrixXd rho = -(s.asDiagonal() * prec * s.asDiagonal());
  rho.diagonal().setOnes();
  return rho;
}

double null_log_density(double rho, double kappa) {
  const double h = 0.5 * (kappa - 1.0);
  const double log_beta = std::lgamma(0.5) + std::lgamma(h) - std::lgamma(0.5 + h);
  return 0.5 * (kappa - 3.0) * std::log1p(-rho * rho) - log_beta;
}

double null_central_mass(double c, double kappa) {
  if (c >= 1.0) return 1.0;
  return boost::math::ibeta(0.5, 0.5 * (kappa - 1.0), c * c);
}

EdgeModelFit edge_probabilities(const std::vector<double>& pcors, const EdgeModelOptions& options) {
  for (std::size_t i = 0; i < pcors.size(); ++i) {
    if (!(std::abs(pcors[i]) < 1.0)) {
      std::ostringstream os;
      os << "partial correlation " << i << " = " << pcors[i] << " is outside (-1, 1)";
      throw DataError(os.str());
    }
  }
  EdgeModelFit fit;
  const std::size_t n = pcors.size();
  if (n < options.min_edges) {
    fit.fallback = true;
    for (double r : pcors)
      fit.probability.push_back(std::abs(r) >= options.fallback_abs_threshold ? 1.0 : 0.0);
    return fit;
  }

  // Work in sorted order so every sum is independent of the input order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    const double x = std::abs(pcors[a]), y = std::abs(pcors[b]);
    return x != y ? x < y : pcors[a] < pcors[b];
  });
  std::vector<double> r(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = pcors[order[i]];
    a[i] = std::abs(r[i]);
  }

  const double cut = quantile_sorted(a, options.central_quantile);
  std::size_t n_central = 0;
  while (n_central < n && a[n_central] <= cut) ++n_central;
  double sum_log1m = 0.0;
  for (std::size_t i = 0; i < n_central; ++i) sum_log1m += std::log1p(-r[i] * r[i]);
  const double nc = static_cast<double>(n_central);

  // Truncated null likelihood over log(kappa - 1).
  auto nll = [&](double u) {
    const double kappa = 1.0 + std::exp(u);
    const double h = 0.5 * (kappa - 1.0);
    const double log_beta = std::lgamma(0.5) + std::lgamma(h) - std::lgamma(0.5 + h);
    double v = -(0.5 * (kappa - 3.0) * sum_log1m - nc * log_beta);
    if (cut > 0.0) v += nc * std::log(null_central_mass(cut, kappa));
    return v;
  };
  const auto best = boost::math::tools::brent_find_minima(nll, std::log(1e-3), std::log(1e7), 60);
  fit.kappa = 1.0 + std::exp(best.first);
  const double mass = cut > 0.0 ? null_central_mass(cut, fit.kappa) : 1.0;
  fit.eta0 = std::min(1.0, nc / (static_cast<double>(n) * mass));

  // Linear-binned Gaussian kernel density on a fixed grid.
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted_r(r);
  std::sort(sorted_r.begin(), sorted_r.end());
  const double iqr = quantile_sorted(sorted_r, 0.75) - quantile_sorted(sorted_r, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1e-3;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  fit.bandwidth = h;
  const std::size_t g = std::max<std::size_t>(options.grid_points, 16);
  const double lo = sorted_r.front() - 4.0 * h;
  const double hi = sorted_r.back() + 4.0 * h;
  const double step = (hi - lo) / static_cast<double>(g - 1);
  std::vector<double> bins(g, 0.0);
  for (double v : sorted_r) {
    const double pos = (v - lo) / step;
    const auto k = std::min(static_cast<std::size_t>(pos), g - 2);
    const double frac = pos - static_cast<double>(k);
    bins[k] += 1.0 - frac;
    bins[k + 1] += frac;
  }
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
  const auto reach = static_cast<long>(std::ceil(8.0 * h / step));
  std::vector<double> dens(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    double acc = 0.0;
    const long first = std::max(0L, static_cast<long>(i) - reach);
    const long last = std::min(static_cast<long>(g) - 1, static_cast<long>(i) + reach);
    for (long k = first; k <= last; ++k) {
      const double d = (static_cast<double>(static_cast<long>(i) - k)) * step / h;
      acc += bins[static_cast<std::size_t>(k)] * std::exp(-0.5 * d * d);
    }
    dens[i] = acc * norm;
  }
  auto density_at = [&](double v) {
    const double pos = (v - lo) / step;
    const auto k = std::min(static_cast<std::size_t>(std::max(0.0, pos)), g - 2);
    const double frac = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
    return (1.0 - frac) * dens[k] + frac * dens[k + 1];
  };

  std::vector<double> prob(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = density_at(r[i]);
    const double f0 = std::exp(null_log_density(r[i], fit.kappa));
    prob[i] = f > 0.0 ? std::clamp(1.0 - fit.eta0 * f0 / f, 0.0, 1.0) : 1.0;
  }

  // Equal |rho| share one block so the isotonic pass is order independent.
  std::vector<double> block_val, block_w;
  std::vector<std::size_t> block_len;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    double s = 0.0;
    while (j < n && a[j] == a[i]) s += prob[j++];
    block_val.push_back(s / static_cast<double>(j - i));
    block_w.push_back(static_cast<double>(j - i));
    block_len.push_back(j - i);
    i = j;
  }
  const auto fitted = isotonic(block_val, block_w);
  fit.probability.assign(n, 0.0);
  for (std::size_t b = 0, i = 0; b < fitted.size(); ++b)
    for (std::size_t t = 0; t < block_len[b]; ++t, ++i)
      fit.probability[order[i]] = std::clamp(fitted[b], 0.0, 1.0);
  return fit;
}

EdgeRecord make_edge(const std::string& g1, const std::string& g2, double pcor, double prob) {
  if (g1 == g2) throw DataError("self edge on gene '" + g1 + "'");
  EdgeRecord e;
  e.gene_a = std::min(g1, g2);
  e.gene_b = std::max(g1, g2);
  e.partial_correlation = pcor;
  e.probability = prob;
  return e;
}

std::vector<EdgeRecord> ensemble_edges(const std::vector<std::vector<EdgeRecord>>& runs,
                                       const EnsembleSpec& spec) {
  std::map<std::pair<std::string, std::string>, EdgeRecord> acc;
  for (const auto& run : runs) {
    std::map<std::pair<std::string, std::string>, const EdgeRecord*> best_in_run;
    for (const auto& e : run) {
      if (!(e.probability >= spec.edge_prob_threshold)) continue;
      const auto key = std::make_pair(std::min(e.gene_a, e.gene_b), std::max(e.gene_a, e.gene_b));
      auto [it, fresh] = best_in_run.emplace(key, &e);
      if (!fresh && e.probability > it->second->probability) it->second = &e;
    }
    for (const auto& [key, e] : best_in_run) {
      auto [it, fresh] = acc.emplace(key, make_edge(key.first, key.second, e->partial_correlation,
                                                    e->probability));
      EdgeRecord& rec = it->second;
      if (!fresh) {
        const bool better =
            e->probability > rec.probability ||
            (e->probability == rec.probability &&
             (std::abs(e->partial_correlation) > std::abs(rec.partial_correlation) ||
              (std::abs(e->partial_correlation) == std::abs(rec.partial_correlation) &&
               e->partial_correlation < rec.partial_correlation)));
        if (better) {
          rec.probability = e->probability;
          rec.partial_correlation = e->partial_correlation;
        }
      }
      ++rec.replication;
    }
  }
  std::vector<EdgeRecord> out;
  for (auto& [key, rec] : acc)
    if (rec.replication >= spec.replication_threshold) out.push_back(rec);
  return out;
}

RunNetwork run_network(const FittedModel& model, const std::vector<std::size_t>& components,
                       double support_eps, const EdgeModelOptions& options) {
  model.validate();
  RunNetwork out;
  out.components = components;
  if (components.empty()) return out;
  std::vector<Eigen::Index> cols;
  std::vector<char> in_subset(model.gene_ids.size(), 0);
  for (const std::size_t c : components) {
    if (c >= model.components()) throw UsageError("component position out of range");
    const auto ci = static_cast<Eigen::Index>(c);
    cols.push_back(ci);
    for (std::size_t g : support(VectorXd(model.lambda.col(ci)), support_eps)) in_subset[g] = 1;
  }
  for (std::size_t g = 0; g < in_subset.size(); ++g)
    if (in_subset[g]) out.genes.push_back(g);
  if (out.genes.size() < 2) return out;

  const MatrixXd lambda_a = model.lambda(Eigen::all, cols);
  const MatrixXd sigma_aa = model.x_cov_sum(cols, cols);
  const MatrixXd rho =
      partial_correlations(build_covariance(lambda_a, sigma_aa, model.psi, out.genes));
  std::vector<double> pcors;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < out.genes.size(); ++i)
    for (std::size_t j = i + 1; j < out.genes.size(); ++j) {
      pcors.push_back(rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      pairs.emplace_back(i, j);
    }
  out.model = edge_probabilities(pcors, options);
  for (std::size_t e = 0; e < pairs.size(); ++e)
    out.edges.push_back(make_edge(model.gene_ids[out.genes[pairs[e].first]],
                                  model.gene_ids[out.genes[pairs[e].second]], pcors[e],
                                  out.model.probability[e]));
  return out;
}

}  // namespace bicmix::network

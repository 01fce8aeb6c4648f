#include "io/files.hpp"

#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "io/tsv.hpp"
#include "vem/updates.hpp"

namespace bicmix::io {

namespace fs = std::filesystem;

namespace {

std::string join(const fs::path& dir, const char* name) { return (dir / name).string(); }

std::size_t parse_size(const std::string& field, const std::string& where) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(field, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != field.size() || field.empty() || field[0] == '-')
    throw DataError("expected a nonnegative integer, got '" + field + "' at " + where);
  return static_cast<std::size_t>(v);
}

bool parse_flag(const std::string& field, const std::string& where) {
  if (field == "1" || field == "true") return true;
  if (field == "0" || field == "false") return false;
  throw DataError("expected 0 or 1, got '" + field + "' at " + where);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s, const std::string& where) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(parse_size(s.substr(start, pos - start), where));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> component_labels(const std::vector<std::size_t>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(component_label(id));
  return out;
}

std::vector<std::size_t> parse_labels(const std::vector<std::string>& labels,
                                      const std::string& where) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < labels.size(); ++i)
    ids.push_back(parse_component_label(labels[i], where + " entry " + std::to_string(i + 1)));
  return ids;
}

void require_same(const std::vector<std::string>& a, const std::vector<std::string>& b,
                  const std::string& what) {
  if (a.size() != b.size())
    throw DataError(what + ": expected " + std::to_string(a.size()) + " entries, found " +
                    std::to_string(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i])
      throw DataError(what + ": entry " + std::to_string(i + 1) + " is '" + b[i] +
                      "', expected '" + a[i] + "'");
}

std::vector<Bicluster> truth_biclusters(const sim::GroundTruth& t) {
  std::vector<Bicluster> out;
  for (Eigen::Index k = 0; k < t.lambda.cols(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (!t.loading_sparse[ku] || !t.factor_sparse[ku]) continue;
    Bicluster b;
    b.genes = support(VectorXd(t.lambda.col(k)), 0.0);
    b.samples = support(VectorXd(t.x.row(k).transpose()), 0.0);
    b.component_index = ku;
    b.run_id = "truth";
    if (!b.genes.empty() && !b.samples.empty()) out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string component_label(std::size_t id) { return "c" + std::to_string(id); }

std::size_t parse_component_label(const std::string& label, const std::string& where) {
  if (label.size() < 2 || label[0] != 'c')
    throw DataError("malformed component label '" + label + "' at " + where);
  return parse_size(label.substr(1), where);
}

std::vector<ComponentRow> summarize_components(const ModelState& state, double threshold,
                                               double support_eps) {
  std::vector<ComponentRow> rows;
  const auto k = static_cast<Eigen::Index>(state.components());
  VectorXd share = VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
  if (k > 0) {
    try {
      share = vem::pve(state);
    } catch (const NumericalError&) {
      // all-zero model: the share is undefined and stays NaN
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    ComponentRow r;
    r.id = state.component_ids[static_cast<std::size_t>(c)];
    r.cls = classify_component(state.loading.z(c), state.factor.o(c), threshold);
    r.pve = share(c);
    r.n_genes = support(VectorXd(state.loading.lambda.col(c)), support_eps).size();
    r.n_samples = support(VectorXd(state.factor.x_mean.row(c).transpose()), support_eps).size();
    rows.push_back(r);
  }
  return rows;
}

std::string format_trace(const std::vector<vem::IterationTrace>& trace) {
  Table t;
  t.header = {"iteration", "residual_norm", "active", "component_ids", "n_genes", "n_samples"};
  for (const auto& e : trace)
    t.rows.push_back({std::to_string(e.iteration), format_double(e.residual_norm),
                      std::to_string(e.active), join_sizes(e.component_ids),
                      join_sizes(e.n_genes), join_sizes(e.n_samples)});
  return format_table(t);
}

std::vector<vem::IterationTrace> read_trace(const std::string& path) {
  const Table t = read_table(path);
  const std::vector<std::string> expect = {"iteration",     "residual_norm", "active",
                                           "component_ids", "n_genes",       "n_samples"};
  require_same(expect, t.header, path + " header");
  std::vector<vem::IterationTrace> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    vem::IterationTrace e;
    e.iteration = parse_size(row[0], where + " column iteration");
    e.residual_norm = parse_double(row[1], where + " column residual_norm");
    e.active = parse_size(row[2], where + " column active");
    e.component_ids = split_sizes(row[3], where + " column component_ids");
    e.n_genes = split_sizes(row[4], where + " column n_genes");
    e.n_samples = split_sizes(row[5], where + " column n_samples");
    if (e.n_genes.size() != e.component_ids.size() || e.n_samples.size() != e.component_ids.size())
      throw DataError(where + ": count lists do not match the component id list");
    out.push_back(std::move(e));
  }
  return out;
}

void write_fit_dir(const std::string& dir_str, const vem::FitProgress& progress,
                   const DataMatrix& data, const std::vector<ComponentRow>& rows) {
  const fs::path dir(dir_str);
  fs::create_directories(dir);
  const ModelState& s = progress.state;
  const auto labels = component_labels(s.component_ids);
  write_labeled_matrix(join(dir, "lambda.tsv"), s.loading.lambda, data.gene_ids, labels, "gene");
  write_labeled_matrix(join(dir, "x.tsv"), s.factor.x_mean, labels, data.sample_ids, "component");
  write_labeled_matrix(join(dir, "x_cov_sum.tsv"), s.x_cov_sum(), labels, labels, "component");
  write_labeled_matrix(join(dir, "psi.tsv"), MatrixXd(s.noise.psi), data.gene_ids, {"psi"},
                       "gene");

  MatrixXd traces(static_cast<Eigen::Index>(s.factor.x_cov.size()), 1);
  for (std::size_t j = 0; j < s.factor.x_cov.size(); ++j)
    traces(static_cast<Eigen::Index>(j), 0) = s.factor.x_cov[j].trace();
  write_labeled_matrix(join(dir, "x_cov_trace.tsv"), traces, data.sample_ids, {"trace"},
                       "sample");

  Table comps;
  comps.header = {"component", "class", "z", "o", "z_ambiguous", "o_ambiguous",
                  "pve", "n_genes", "n_samples"};
  for (const auto& r : rows)
    comps.rows.push_back({component_label(r.id), to_string(r.cls.cls), format_double(r.cls.z),
                          format_double(r.cls.o), r.cls.z_ambiguous ? "1" : "0",
                          r.cls.o_ambiguous ? "1" : "0", format_double(r.pve),
                          std::to_string(r.n_genes), std::to_string(r.n_samples)});
  write_file_atomic(join(dir, "components.tsv"), format_table(comps));
  write_file_atomic(join(dir, "trace.tsv"), format_trace(progress.trace));
}

FitDir read_fit_dir(const std::string& dir_str) {
  const fs::path dir(dir_str);
  if (!fs::is_directory(dir)) throw DataError("fit directory '" + dir_str + "' does not exist");
  FitDir out;
  auto& m = out.model;
  std::vector<std::string> comp_cols, comp_rows, rows2, cols2, psi_cols;

  m.lambda = read_labeled_matrix(join(dir, "lambda.tsv"), m.gene_ids, comp_cols);
  m.component_ids = parse_labels(comp_cols, join(dir, "lambda.tsv") + " header");
  m.x_mean = read_labeled_matrix(join(dir, "x.tsv"), comp_rows, m.sample_ids);
  require_same(comp_cols, comp_rows, join(dir, "x.tsv") + " component rows");
  m.x_cov_sum = read_labeled_matrix(join(dir, "x_cov_sum.tsv"), rows2, cols2);
  require_same(comp_cols, rows2, join(dir, "x_cov_sum.tsv") + " rows");
  require_same(comp_cols, cols2, join(dir, "x_cov_sum.tsv") + " columns");
  std::vector<std::string> psi_genes;
  const MatrixXd psi = read_labeled_matrix(join(dir, "psi.tsv"), psi_genes, psi_cols);
  require_same(m.gene_ids, psi_genes, join(dir, "psi.tsv") + " genes");
  if (psi.cols() != 1) throw DataError(join(dir, "psi.tsv") + ": expected one value column");
  m.psi = psi.col(0);

  const std::string comp_path = join(dir, "components.tsv");
  const Table comps = read_table(comp_path);
  const std::vector<std::string> expect = {"component",   "class", "z",       "o",        "z_ambiguous",
                                           "o_ambiguous", "pve",   "n_genes", "n_samples"};
  require_same(expect, comps.header, comp_path + " header");
  std::vector<std::string> listed;
  m.z.resize(static_cast<Eigen::Index>(comps.rows.size()));
  m.o.resize(static_cast<Eigen::Index>(comps.rows.size()));
  for (std::size_t r = 0; r < comps.rows.size(); ++r) {
    const auto& row = comps.rows[r];
    const std::string where = comp_path + " row " + std::to_string(r + 1);
    ComponentRow c;
    c.id = parse_component_label(row[0], where);
    c.cls.cls = sparsity_class_from_string(row[1]);
    c.cls.z = parse_double(row[2], where + " column z");
    c.cls.o = parse_double(row[3], where + " column o");
    c.cls.z_ambiguous = parse_flag(row[4], where + " column z_ambiguous");
    c.cls.o_ambiguous = parse_flag(row[5], where + " column o_ambiguous");
    c.pve = parse_double(row[6], where + " column pve");
    c.n_genes = parse_size(row[7], where + " column n_genes");
    c.n_samples = parse_size(row[8], where + " column n_samples");
    m.z(static_cast<Eigen::Index>(r)) = c.cls.z;
    m.o(static_cast<Eigen::Index>(r)) = c.cls.o;
    listed.push_back(row[0]);
    out.components.push_back(c);
  }
  require_same(comp_cols, listed, comp_path + " components");
  m.validate();
  out.trace = read_trace(join(dir, "trace.tsv"));
  return out;
}

void write_sim_dir(const std::string& dir_str, const DataMatrix& data,
                   const sim::GroundTruth& truth) {
  const fs::path dir(dir_str);
  fs::create_directories(dir);
  std::vector<std::size_t> ids(static_cast<std::size_t>(truth.lambda.cols()));
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = k;
  const auto labels = component_labels(ids);
  write_data_matrix(join(dir, "y.tsv"), data);
  write_labeled_matrix(join(dir, "truth_lambda.tsv"), truth.lambda, data.gene_ids, labels, "gene");
  write_labeled_matrix(join(dir, "truth_x.tsv"), truth.x, labels, data.sample_ids, "component");
  Table t;
  t.header = {"component", "loading_sparse", "factor_sparse"};
  for (std::size_t k = 0; k < ids.size(); ++k)
    t.rows.push_back({labels[k], truth.loading_sparse[k] ? "1" : "0",
                      truth.factor_sparse[k] ? "1" : "0"});
  write_file_atomic(join(dir, "truth_components.tsv"), format_table(t));
}

SimDir read_sim_dir(const std::string& dir_str) {
  const fs::path dir(dir_str);
  if (!fs::is_directory(dir))
    throw DataError("simulation directory '" + dir_str + "' does not exist");
  SimDir out;
  out.data = read_data_matrix(join(dir, "y.tsv"));
  std::vector<std::string> genes, comps, comps2, samples;
  out.truth.lambda = read_labeled_matrix(join(dir, "truth_lambda.tsv"), genes, comps);
  require_same(out.data.gene_ids, genes, join(dir, "truth_lambda.tsv") + " genes");
  out.truth.x = read_labeled_matrix(join(dir, "truth_x.tsv"), comps2, samples);
  require_same(comps, comps2, join(dir, "truth_x.tsv") + " components");
  require_same(out.data.sample_ids, samples, join(dir, "truth_x.tsv") + " samples");
  const std::string path = join(dir, "truth_components.tsv");
  const Table t = read_table(path);
  require_same({"component", "loading_sparse", "factor_sparse"}, t.header, path + " header");
  std::vector<std::string> listed;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + " row " + std::to_string(r + 1);
    listed.push_back(t.rows[r][0]);
    out.truth.loading_sparse.push_back(parse_flag(t.rows[r][1], where));
    out.truth.factor_sparse.push_back(parse_flag(t.rows[r][2], where));
  }
  require_same(comps, listed, path + " components");
  out.truth.biclusters = truth_biclusters(out.truth);
  return out;
}

void write_edges(const std::string& path, const std::vector<network::EdgeRecord>& edges) {
  Table t;
  t.header = {"gene_a", "gene_b", "pcor", "prob", "replication"};
  for (const auto& e : edges)
    t.rows.push_back({e.gene_a, e.gene_b, format_double(e.partial_correlation),
                      format_double(e.probability), std::to_string(e.replication)});
  write_file_atomic(path, format_table(t));
}

std::vector<network::EdgeRecord> read_edges(const std::string& path) {
  const Table t = read_table(path);
  require_same({"gene_a", "gene_b", "pcor", "prob", "replication"}, t.header, path + " header");
  std::vector<network::EdgeRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    network::EdgeRecord e;
    e.gene_a = row[0];
    e.gene_b = row[1];
    e.partial_correlation = parse_double(row[2], where + " column pcor");
    e.probability = parse_double(row[3], where + " column prob");
    e.replication = parse_size(row[4], where + " column replication");
    out.push_back(std::move(e));
  }
  return out;
}

void write_dot(const std::string& path, const std::vector<network::EdgeRecord>& edges) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') q += '\\';
      q += c;
    }
    return q + '"';
  };
  std::ostringstream os;
  os << "graph bicmix {\n";
  for (const auto& e : edges)
    os << "  " << quote(e.gene_a) << " -- " << quote(e.gene_b) << " [weight=" << e.replication
       << ", pcor=" << format_double(e.partial_correlation)
       << ", prob=" << format_double(e.probability) << "];\n";
  os << "}\n";
  write_file_atomic(path, os.str());
}

}  // namespace bicmix::io

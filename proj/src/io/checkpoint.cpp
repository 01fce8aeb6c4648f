#include "io/checkpoint.hpp"

#include <cstring>
#include <type_traits>

#include "core/error.hpp"
#include "io/digest.hpp"
#include "io/tsv.hpp"

namespace bicmix::io {

namespace {

constexpr char kMagic[8] = {'B', 'I', 'C', 'M', 'I', 'X', 'C', 'P'};
constexpr std::uint32_t kByteOrderMark = 0x01020304u;
constexpr std::size_t kDigestSize = 32;

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void u64(std::uint64_t v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    buf_.append(s);
  }
  void matrix(const MatrixXd& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    buf_.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
  }
  void vector(const VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    buf_.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
  }
  void sizes(const std::vector<std::size_t>& v) {
    u64(v.size());
    for (auto x : v) u64(x);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : p_(data), end_(data + size) {}
  template <typename T>
  T pod() {
    T v;
    need(sizeof v);
    std::memcpy(&v, p_, sizeof v);
    p_ += sizeof v;
    return v;
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::size_t count(std::size_t elem_size) {
    const std::uint64_t n = u64();
    if (elem_size && n > static_cast<std::uint64_t>(end_ - p_) / elem_size) truncated();
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    const std::size_t n = count(1);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  MatrixXd matrix() {
    const std::uint64_t r = u64();
    const std::uint64_t c = u64();
    if (c && r > static_cast<std::uint64_t>(end_ - p_) / sizeof(double) / c) truncated();
    MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    std::memcpy(m.data(), p_, sizeof(double) * r * c);
    p_ += sizeof(double) * r * c;
    return m;
  }
  VectorXd vector() {
    const std::size_t n = count(sizeof(double));
    VectorXd v(static_cast<Eigen::Index>(n));
    std::memcpy(v.data(), p_, sizeof(double) * n);
    p_ += sizeof(double) * n;
    return v;
  }
  std::vector<std::size_t> sizes() {
    const std::size_t n = count(sizeof(std::uint64_t));
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = static_cast<std::size_t>(u64());
    return v;
  }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) truncated();
  }
  [[noreturn]] static void truncated() { throw DataError("checkpoint payload is truncated"); }
  const char* p_;
  const char* end_;
};

void write_hyper(Writer& w, const Hyperparameters& h) {
  for (double v : {h.a, h.b, h.c, h.d, h.e, h.f, h.nu, h.a_x, h.b_x, h.c_x, h.d_x, h.e_x, h.f_x,
                   h.xi, h.alpha, h.beta, h.alpha_x, h.beta_x})
    w.f64(v);
}

Hyperparameters read_hyper(Reader& r) {
  Hyperparameters h;
  for (double* v : {&h.a, &h.b, &h.c, &h.d, &h.e, &h.f, &h.nu, &h.a_x, &h.b_x, &h.c_x, &h.d_x,
                    &h.e_x, &h.f_x, &h.xi, &h.alpha, &h.beta, &h.alpha_x, &h.beta_x})
    *v = r.f64();
  return h;
}

void write_config(Writer& w, const vem::FitConfig& c) {
  w.u64(c.k_init);
  w.u64(c.max_iterations);
  w.u64(c.seed);
  w.f64(c.prune_eps);
  w.f64(c.converge_tol);
  w.f64(c.classification_threshold);
  w.u64(c.warm_start_iterations);
  w.f64(c.support_eps);
  w.u64(c.rate_update == vem::RateUpdate::Mean ? 1 : 0);
}

vem::FitConfig read_config(Reader& r) {
  vem::FitConfig c;
  c.k_init = r.u64();
  c.max_iterations = r.u64();
  c.seed = r.u64();
  c.prune_eps = r.f64();
  c.converge_tol = r.f64();
  c.classification_threshold = r.f64();
  c.warm_start_iterations = r.u64();
  c.support_eps = r.f64();
  c.rate_update = r.u64() ? vem::RateUpdate::Mean : vem::RateUpdate::Mode;
  return c;
}

void write_state(Writer& w, const ModelState& s) {
  const auto& L = s.loading;
  w.matrix(L.lambda);
  w.matrix(L.theta);
  w.matrix(L.delta);
  w.vector(L.phi);
  w.vector(L.tau);
  w.f64(L.eta);
  w.f64(L.gamma);
  w.vector(L.z);
  w.f64(L.ln_pi);
  w.f64(L.ln_one_minus_pi);
  const auto& F = s.factor;
  w.matrix(F.x_mean);
  w.u64(F.x_cov.size());
  for (const auto& c : F.x_cov) w.matrix(c);
  w.matrix(F.sigma);
  w.matrix(F.rho);
  w.vector(F.omega);
  w.vector(F.kappa);
  w.f64(F.chi);
  w.f64(F.varphi);
  w.vector(F.o);
  w.f64(F.ln_pi);
  w.f64(F.ln_one_minus_pi);
  w.vector(s.noise.psi);
  w.sizes(s.component_ids);
}

ModelState read_state(Reader& r) {
  ModelState s;
  auto& L = s.loading;
  L.lambda = r.matrix();
  L.theta = r.matrix();
  L.delta = r.matrix();
  L.phi = r.vector();
  L.tau = r.vector();
  L.eta = r.f64();
  L.gamma = r.f64();
  L.z = r.vector();
  L.ln_pi = r.f64();
  L.ln_one_minus_pi = r.f64();
  auto& F = s.factor;
  F.x_mean = r.matrix();
  const std::size_t ncov = r.count(2 * sizeof(std::uint64_t));
  F.x_cov.reserve(ncov);
  for (std::size_t j = 0; j < ncov; ++j) F.x_cov.push_back(r.matrix());
  F.sigma = r.matrix();
  F.rho = r.matrix();
  F.omega = r.vector();
  F.kappa = r.vector();
  F.chi = r.f64();
  F.varphi = r.f64();
  F.o = r.vector();
  F.ln_pi = r.f64();
  F.ln_one_minus_pi = r.f64();
  s.noise.psi = r.vector();
  s.component_ids = r.sizes();
  return s;
}

void write_trace(Writer& w, const std::vector<vem::IterationTrace>& trace) {
  w.u64(trace.size());
  for (const auto& t : trace) {
    w.u64(t.iteration);
    w.sizes(t.component_ids);
    w.sizes(t.n_genes);
    w.sizes(t.n_samples);
    w.f64(t.residual_norm);
    w.u64(t.active);
  }
}

std::vector<vem::IterationTrace> read_trace(Reader& r) {
  const std::size_t n = r.count(sizeof(std::uint64_t));
  std::vector<vem::IterationTrace> trace(n);
  for (auto& t : trace) {
    t.iteration = r.u64();
    t.component_ids = r.sizes();
    t.n_genes = r.sizes();
    t.n_samples = r.sizes();
    t.residual_norm = r.f64();
    t.active = r.u64();
  }
  return trace;
}

}  // namespace

std::string data_fingerprint(const DataMatrix& data) {
  Writer w;
  w.matrix(data.values);
  for (const auto& g : data.gene_ids) w.str(g);
  for (const auto& s : data.sample_ids) w.str(s);
  return sha256_hex(w.bytes());
}

std::string encode_checkpoint(const Checkpoint& cp) {
  Writer payload;
  write_hyper(payload, cp.hyper);
  write_config(payload, cp.config);
  payload.str(cp.data_digest);
  payload.u64(cp.progress.iteration);
  payload.u64(cp.progress.converged_at ? 1 : 0);
  payload.u64(cp.progress.converged_at.value_or(0));
  payload.u64(cp.progress.hyper_warning ? 1 : 0);
  payload.str(cp.progress.rng.serialize());
  write_state(payload, cp.progress.state);
  write_trace(payload, cp.progress.trace);

  Writer out;
  out.bytes().append(kMagic, sizeof kMagic);
  out.pod(kCheckpointVersion);
  out.pod(kByteOrderMark);
  out.u64(payload.bytes().size());
  out.bytes().append(payload.bytes());
  out.bytes().append(sha256_raw(payload.bytes()));
  return std::move(out.bytes());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  constexpr std::size_t header = sizeof kMagic + 2 * sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < header || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("not a checkpoint file (bad magic)");
  Reader head(bytes.data() + sizeof kMagic, header - sizeof kMagic);
  const auto version = head.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint format version " + std::to_string(version) +
                    " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  if (head.pod<std::uint32_t>() != kByteOrderMark)
    throw DataError("checkpoint was written on a machine with a different byte order");
  const std::uint64_t len = head.u64();
  if (bytes.size() - header < kDigestSize || len != bytes.size() - header - kDigestSize)
    throw DataError("checkpoint length does not match its header (truncated or padded)");
  const std::string_view payload(bytes.data() + header, len);
  if (sha256_raw(payload) != std::string_view(bytes.data() + header + len, kDigestSize))
    throw DataError("checkpoint checksum mismatch (file is corrupted)");

  Reader r(payload.data(), payload.size());
  Checkpoint cp;
  cp.hyper = read_hyper(r);
  cp.config = read_config(r);
  cp.data_digest = r.str();
  cp.progress.iteration = r.u64();
  const bool converged = r.u64() != 0;
  const std::size_t at = r.u64();
  if (converged) cp.progress.converged_at = at;
  cp.progress.hyper_warning = r.u64() != 0;
  try {
    cp.progress.rng.deserialize(r.str());
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw DataError(std::string("checkpoint random state is unreadable: ") + ex.what());
  }
  cp.progress.state = read_state(r);
  cp.progress.trace = read_trace(r);
  if (!r.done()) throw DataError("checkpoint payload has trailing bytes");
  try {
    validate_state(cp.progress.state);
  } catch (const NumericalError& ex) {
    throw DataError(std::string("checkpoint holds an invalid model state: ") + ex.what());
  }
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  write_file_atomic(path, encode_checkpoint(cp));
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const DataError& ex) {
    throw DataError(path + ": " + ex.what());
  }
}

}  // namespace bicmix::io

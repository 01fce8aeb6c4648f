#include "core/types.hpp"

#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace bicmix {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "hyperparameter " << name << " must be a positive finite number, got " << v;
    throw UsageError(os.str());
  }
}

void check_floor(const MatrixXd& m, const char* name) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double v = m(i, j);
      if (!(v >= kFloor) || !std::isfinite(v)) {
        std::ostringstream os;
        os << name << "(" << i << "," << j << ") = " << v << " violates the scale floor";
        throw NumericalError(os.str());
      }
    }
  }
}

void check_floor(double v, const char* name) {
  if (!(v >= kFloor) || !std::isfinite(v)) {
    std::ostringstream os;
    os << name << " = " << v << " violates the scale floor";
    throw NumericalError(os.str());
  }
}

void check_unit(const VectorXd& v, const char* name) {
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!(v(k) >= 0.0 && v(k) <= 1.0)) {
      std::ostringstream os;
      os << name << "(" << k << ") = " << v(k) << " outside [0,1]";
      throw NumericalError(os.str());
    }
  }
}

void check_shape(bool ok, const char* what) {
  if (!ok) throw NumericalError(std::string("inconsistent model state shape: ") + what);
}

}  // namespace

void Hyperparameters::validate() const {
  require_positive(a, "a");
  require_positive(b, "b");
  require_positive(c, "c");
  require_positive(d, "d");
  require_positive(e, "e");
  require_positive(f, "f");
  require_positive(nu, "nu");
  require_positive(a_x, "a_x");
  require_positive(b_x, "b_x");
  require_positive(c_x, "c_x");
  require_positive(d_x, "d_x");
  require_positive(e_x, "e_x");
  require_positive(f_x, "f_x");
  require_positive(xi, "xi");
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  require_positive(alpha_x, "alpha_x");
  require_positive(beta_x, "beta_x");
}

DataMatrix DataMatrix::from_values(MatrixXd values) {
  DataMatrix m;
  m.values = std::move(values);
  m.gene_ids.reserve(m.genes());
  for (std::size_t i = 0; i < m.genes(); ++i) m.gene_ids.push_back("gene_" + std::to_string(i));
  m.sample_ids.reserve(m.samples());
  for (std::size_t j = 0; j < m.samples(); ++j)
    m.sample_ids.push_back("sample_" + std::to_string(j));
  return m;
}

void DataMatrix::validate() const {
  if (values.rows() < 2 || values.cols() < 2) {
    std::ostringstream os;
    os << "data matrix must be at least 2x2, got " << values.rows() << "x" << values.cols();
    throw DataError(os.str());
  }
  if (gene_ids.size() != genes()) throw DataError("gene id count does not match row count");
  if (sample_ids.size() != samples())
    throw DataError("sample id count does not match column count");
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!std::isfinite(values(i, j))) {
        std::ostringstream os;
        os << "non-finite value at row " << i << " (" << gene_ids[i] << "), column " << j
           << " (" << sample_ids[j] << ")";
        throw DataError(os.str());
      }
    }
  }
}

MatrixXd ModelState::x_cov_sum() const {
  const auto k = static_cast<Eigen::Index>(components());
  MatrixXd sum = MatrixXd::Zero(k, k);
  for (const auto& cov : factor.x_cov) sum += cov;
  return sum;
}

MatrixXd ModelState::x_second_moment() const {
  MatrixXd m = factor.x_mean * factor.x_mean.transpose();
  for (const auto& cov : factor.x_cov) m += cov;
  return m;
}

void validate_state(const ModelState& s) {
  const auto k = static_cast<Eigen::Index>(s.components());
  const auto p = s.loading.lambda.rows();
  const auto n = s.factor.x_mean.cols();
  check_shape(s.loading.lambda.cols() == k, "lambda columns");
  check_shape(s.loading.theta.rows() == p && s.loading.theta.cols() == k, "theta");
  check_shape(s.loading.delta.rows() == p && s.loading.delta.cols() == k, "delta");
  check_shape(s.loading.phi.size() == k && s.loading.tau.size() == k, "phi/tau");
  check_shape(s.loading.z.size() == k, "z");
  check_shape(s.factor.x_mean.rows() == k, "x_mean rows");
  check_shape(s.factor.sigma.rows() == k && s.factor.sigma.cols() == n, "sigma");
  check_shape(s.factor.rho.rows() == k && s.factor.rho.cols() == n, "rho");
  check_shape(s.factor.omega.size() == k && s.factor.kappa.size() == k, "omega/kappa");
  check_shape(s.factor.o.size() == k, "o");
  check_shape(static_cast<Eigen::Index>(s.factor.x_cov.size()) == n, "x_cov count");
  check_shape(s.noise.psi.size() == p, "psi");

  check_floor(s.loading.theta, "theta");
  check_floor(s.loading.delta, "delta");
  check_floor(s.loading.phi, "phi");
  check_floor(s.loading.tau, "tau");
  check_floor(s.loading.eta, "eta");
  check_floor(s.loading.gamma, "gamma");
  check_floor(s.factor.sigma, "sigma");
  check_floor(s.factor.rho, "rho");
  check_floor(s.factor.omega, "omega");
  check_floor(s.factor.kappa, "kappa");
  check_floor(s.factor.chi, "chi");
  check_floor(s.factor.varphi, "varphi");
  check_floor(s.noise.psi, "psi");
  check_unit(s.loading.z, "z");
  check_unit(s.factor.o, "o");

  for (std::size_t j = 0; j < s.factor.x_cov.size(); ++j) {
    const MatrixXd& cov = s.factor.x_cov[j];
    check_shape(cov.rows() == k && cov.cols() == k, "x_cov entry");
    if (!cov.isApprox(cov.transpose(), 1e-9) && cov.norm() > 0.0) {
      std::ostringstream os;
      os << "x_cov[" << j << "] is not symmetric";
      throw NumericalError(os.str());
    }
  }
}

ComponentClass classify_component(double z, double o, double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) {
    std::ostringstream os;
    os << "classification threshold must lie in (0.5, 1], got " << threshold;
    throw UsageError(os.str());
  }
  ComponentClass out;
  out.z = z;
  out.o = o;
  auto side = [threshold](double v, bool& ambiguous) {
    if (v >= threshold) return Sparsity::Sparse;
    if (v <= 1.0 - threshold) return Sparsity::Dense;
    ambiguous = true;
    return v > 0.5 ? Sparsity::Sparse : Sparsity::Dense;
  };
  const Sparsity loading = side(z, out.z_ambiguous);
  const Sparsity factor = side(o, out.o_ambiguous);
  if (loading == Sparsity::Sparse)
    out.cls = factor == Sparsity::Sparse ? SparsityClass::SS : SparsityClass::SD;
  else
    out.cls = factor == Sparsity::Sparse ? SparsityClass::DS : SparsityClass::DD;
  return out;
}

const char* to_string(SparsityClass cls) {
  switch (cls) {
    case SparsityClass::SS: return "SS";
    case SparsityClass::SD: return "SD";
    case SparsityClass::DS: return "DS";
    case SparsityClass::DD: return "DD";
  }
  return "??";
}

SparsityClass sparsity_class_from_string(const std::string& s) {
  if (s == "SS") return SparsityClass::SS;
  if (s == "SD") return SparsityClass::SD;
  if (s == "DS") return SparsityClass::DS;
  if (s == "DD") return SparsityClass::DD;
  throw DataError("unknown component class '" + s + "'");
}

std::vector<std::size_t> support(std::span<const double> v, double eps) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > eps) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> support(const VectorXd& v, double eps) {
  return support(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), eps);
}

}  // namespace bicmix

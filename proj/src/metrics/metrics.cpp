#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <utility>

#include "core/error.hpp"

namespace bicmix::metrics {

namespace {

std::size_t intersection_size(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out.size();
}

double best_match(const Bicluster& b, const std::vector<Bicluster>& others, JaccardMode mode) {
  double best = 0.0;
  for (const auto& o : others) best = std::max(best, jaccard(b, o, mode));
  return best;
}

}  // namespace

JaccardMode jaccard_mode_from_string(const std::string& s) {
  if (s == "cells") return JaccardMode::Cells;
  if (s == "genes") return JaccardMode::Genes;
  throw UsageError("unknown Jaccard mode '" + s + "' (expected cells or genes)");
}

const char* to_string(JaccardMode mode) { return mode == JaccardMode::Cells ? "cells" : "genes"; }

double jaccard(const Bicluster& b1, const Bicluster& b2, JaccardMode mode) {
  if (b1.genes.empty() || b2.genes.empty() ||
      (mode == JaccardMode::Cells && (b1.samples.empty() || b2.samples.empty())))
    throw DataError("Jaccard index is undefined for an empty bicluster");
  const double gi = static_cast<double>(intersection_size(b1.genes, b2.genes));
  if (mode == JaccardMode::Genes) {
    const double uni = static_cast<double>(b1.genes.size() + b2.genes.size()) - gi;
    return gi / uni;
  }
  const double si = static_cast<double>(intersection_size(b1.samples, b2.samples));
  const double inter = gi * si;
  const double size1 = static_cast<double>(b1.genes.size() * b1.samples.size());
  const double size2 = static_cast<double>(b2.genes.size() * b2.samples.size());
  return inter / (size1 + size2 - inter);
}

ScorePair recovery_relevance(const std::vector<Bicluster>& truth,
                             const std::vector<Bicluster>& found, JaccardMode mode) {
  ScorePair s;
  if (truth.empty() || found.empty()) return s;
  for (const auto& t : truth) s.recovery += best_match(t, found, mode);
  for (const auto& f : found) s.relevance += best_match(f, truth, mode);
  s.recovery /= static_cast<double>(truth.size());
  s.relevance /= static_cast<double>(found.size());
  return s;
}

double stability_index(const MatrixXd& truth, const MatrixXd& estimate) {
  if (truth.rows() != estimate.rows())
    throw DataError("stability index needs matrices with equal row counts");
  if (truth.cols() < 1 || estimate.cols() < 1)
    throw DataError("stability index needs at least one column on each side");
  auto standardize = [](const MatrixXd& m) {
    MatrixXd z = m.rowwise() - m.colwise().mean();
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double norm = z.col(c).norm();
      if (norm > 0.0)
        z.col(c) /= norm;
      else
        z.col(c).setZero();
    }
    return z;
  };
  const MatrixXd r = (standardize(truth).transpose() * standardize(estimate)).cwiseAbs();
  const double rows = r.rowwise().maxCoeff().mean();
  const double cols = r.colwise().maxCoeff().mean();
  return std::clamp(0.5 * (rows + cols), 0.0, 1.0);
}

std::size_t redundancy_count(const std::vector<Bicluster>& components) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const Bicluster*>> groups;
  for (const auto& c : components) groups[{c.genes.size(), c.samples.size()}].push_back(&c);
  std::size_t count = 0;
  for (const auto& [key, members] : groups) {
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        if (members[i]->genes == members[j]->genes && members[i]->samples == members[j]->samples)
          ++count;
  }
  return count;
}

std::vector<Bicluster> extract_biclusters(const MatrixXd& lambda, const MatrixXd& x_mean,
                                          const VectorXd& z, const VectorXd& o, double threshold,
                                          double support_eps, const std::string& run_id) {
  std::vector<Bicluster> out;
  for (Eigen::Index c = 0; c < lambda.cols(); ++c) {
    const auto cls = classify_component(z(c), o(c), threshold);
    if (cls.cls != SparsityClass::SS) continue;
    Bicluster b;
    b.genes = support(VectorXd(lambda.col(c)), support_eps);
    b.samples = support(VectorXd(x_mean.row(c).transpose()), support_eps);
    b.component_index = static_cast<std::size_t>(c);
    b.run_id = run_id;
    if (!b.genes.empty() && !b.samples.empty()) out.push_back(std::move(b));
  }
  return out;
}

std::vector<Bicluster> extract_biclusters(const ModelState& state, double threshold,
                                          double support_eps, const std::string& run_id) {
  return extract_biclusters(state.loading.lambda, state.factor.x_mean, state.loading.z,
                            state.factor.o, threshold, support_eps, run_id);
}

}  // namespace bicmix::metrics

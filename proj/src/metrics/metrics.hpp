#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"

namespace bicmix::metrics {

enum class JaccardMode { Cells, Genes };

JaccardMode jaccard_mode_from_string(const std::string& s);
const char* to_string(JaccardMode mode);

// Cells mode compares gene x sample cell sets, genes mode compares gene sets.
// Throws DataError for an empty bicluster.
double jaccard(const Bicluster& b1, const Bicluster& b2, JaccardMode mode);

struct ScorePair {
  double recovery = 0.0;
  double relevance = 0.0;
};

// Best-match Jaccard averaged over truth (recovery) and over found (relevance).
// An empty found set scores (0, 0).
ScorePair recovery_relevance(const std::vector<Bicluster>& truth,
                             const std::vector<Bicluster>& found, JaccardMode mode);

// Mean of best column matches by |Pearson r| in both directions. Constant
// columns have r = 0 against everything.
double stability_index(const MatrixXd& truth, const MatrixXd& estimate);

// Pairs of components with identical gene and sample supports.
std::size_t redundancy_count(const std::vector<Bicluster>& components);

// Components classified SS at threshold with non-empty supports on both sides.
std::vector<Bicluster> extract_biclusters(const MatrixXd& lambda, const MatrixXd& x_mean,
                                          const VectorXd& z, const VectorXd& o, double threshold,
                                          double support_eps, const std::string& run_id);
std::vector<Bicluster> extract_biclusters(const ModelState& state, double threshold,
                                          double support_eps, const std::string& run_id);

}  // namespace bicmix::metrics

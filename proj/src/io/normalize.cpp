#include "io/normalize.hpp"

#include <algorithm>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "core/error.hpp"

namespace bicmix::io {

NormalizeResult quantile_normalize(const MatrixXd& values) {
  const auto n = values.cols();
  if (n < 2) throw UsageError("quantile normalization needs at least two samples");
  const boost::math::normal_distribution<double> std_normal;
  NormalizeResult out;
  out.values.resize(values.rows(), n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values(i, a) < values(i, b); });
    if (values(i, order.front()) == values(i, order.back())) {
      out.values.row(i).setZero();
      out.constant_rows.push_back(static_cast<std::size_t>(i));
      continue;
    }
    Eigen::Index start = 0;
    while (start < n) {
      Eigen::Index end = start + 1;
      while (end < n && values(i, order[end]) == values(i, order[start])) ++end;
      // 1-based ranks start+1..end share their mean
      const double rank = 0.5 * static_cast<double>(start + 1 + end);
      const double q =
          boost::math::quantile(std_normal, (rank - 0.5) / static_cast<double>(n));
      for (Eigen::Index t = start; t < end; ++t) out.values(i, order[t]) = q;
      start = end;
    }
  }
  return out;
}

}  // namespace bicmix::io

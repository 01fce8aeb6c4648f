#pragma once

#include <cstddef>
#include <vector>

#include "core/types.hpp"

namespace bicmix::io {

struct NormalizeResult {
  MatrixXd values;
  std::vector<std::size_t> constant_rows;  // rows set to zero
};

// Per row: average ranks r mapped to the standard normal quantile of (r - 0.5) / n.
// UsageError when fewer than two columns.
NormalizeResult quantile_normalize(const MatrixXd& values);

}  // namespace bicmix::io

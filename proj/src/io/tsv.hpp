#pragma once

#include <string>
#include <vector>

#include "core/types.hpp"

namespace bicmix::io {

// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);
// Strict parse of a whole field; DataError naming the location on failure.
double parse_double(const std::string& field, const std::string& where);

// Writes content to path through a sibling temporary file and rename, so an
// interrupted write never leaves a truncated file at path.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Tab-separated table with a header line; every row must match the header width.
Table read_table(const std::string& path);
std::string format_table(const Table& table);

// Header: corner label then column ids; each row: row id then values.
MatrixXd read_labeled_matrix(const std::string& path, std::vector<std::string>& row_ids,
                             std::vector<std::string>& col_ids);
void write_labeled_matrix(const std::string& path, const MatrixXd& values,
                          const std::vector<std::string>& row_ids,
                          const std::vector<std::string>& col_ids,
                          const std::string& corner = "id");

DataMatrix read_data_matrix(const std::string& path);
void write_data_matrix(const std::string& path, const DataMatrix& data);

// Two-column (sample_id, label) file aligned to sample_ids. Unknown or missing
// samples raise DataError.
std::vector<std::string> read_labels(const std::string& path,
                                     const std::vector<std::string>& sample_ids);

}  // namespace bicmix::io

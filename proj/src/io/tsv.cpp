#include "io/tsv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "core/error.hpp"

namespace bicmix::io {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& where) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    // from_chars rejects "inf"/"nan" spellings of some writers; try strtod.
    errno = 0;
    char* end = nullptr;
    const std::string s(first, last);
    v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
      throw DataError("cannot parse number '" + field + "' at " + where);
  }
  return v;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp =
      target.parent_path() / ("." + target.filename().string() + ".tmp." + std::to_string(getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot move output into place at '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Table read_table(const std::string& path) {
  std::istringstream in(read_file(path));
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      std::ostringstream os;
      os << path << ": line " << lineno << " has " << fields.size() << " fields, header has "
         << t.header.size();
      throw DataError(os.str());
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError(path + ": empty file");
  return t;
}

std::string format_table(const Table& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out += '\t';
      out += f[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

MatrixXd read_labeled_matrix(const std::string& path, std::vector<std::string>& row_ids,
                             std::vector<std::string>& col_ids) {
  const Table t = read_table(path);
  if (t.header.size() < 2) throw DataError(path + ": header needs a corner cell and column ids");
  col_ids.assign(t.header.begin() + 1, t.header.end());
  row_ids.clear();
  MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(col_ids.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    row_ids.push_back(t.rows[r][0]);
    for (std::size_t c = 0; c < col_ids.size(); ++c) {
      std::ostringstream where;
      where << path << " row " << (r + 1) << " (" << t.rows[r][0] << "), column " << (c + 1)
            << " (" << col_ids[c] << ")";
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(t.rows[r][c + 1], where.str());
    }
  }
  return m;
}

void write_labeled_matrix(const std::string& path, const MatrixXd& values,
                          const std::vector<std::string>& row_ids,
                          const std::vector<std::string>& col_ids, const std::string& corner) {
  if (row_ids.size() != static_cast<std::size_t>(values.rows()) ||
      col_ids.size() != static_cast<std::size_t>(values.cols()))
    throw DataError("identifier count does not match matrix shape for '" + path + "'");
  std::string out = corner;
  for (const auto& c : col_ids) out += '\t' + c;
  out += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += row_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < values.cols(); ++c) out += '\t' + format_double(values(r, c));
    out += '\n';
  }
  write_file_atomic(path, out);
}

DataMatrix read_data_matrix(const std::string& path) {
  DataMatrix d;
  d.values = read_labeled_matrix(path, d.gene_ids, d.sample_ids);
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < d.gene_ids.size(); ++i)
    if (!seen.emplace(d.gene_ids[i], i).second)
      throw DataError(path + ": duplicate gene id '" + d.gene_ids[i] + "' at row " +
                      std::to_string(i + 1));
  seen.clear();
  for (std::size_t j = 0; j < d.sample_ids.size(); ++j)
    if (!seen.emplace(d.sample_ids[j], j).second)
      throw DataError(path + ": duplicate sample id '" + d.sample_ids[j] + "' at column " +
                      std::to_string(j + 1));
  d.validate();
  return d;
}

void write_data_matrix(const std::string& path, const DataMatrix& data) {
  write_labeled_matrix(path, data.values, data.gene_ids, data.sample_ids, "gene");
}

std::vector<std::string> read_labels(const std::string& path,
                                     const std::vector<std::string>& sample_ids) {
  const Table t = read_table(path);
  if (t.header.size() != 2) throw DataError(path + ": labels need two columns (sample_id, label)");
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < sample_ids.size(); ++j) index[sample_ids[j]] = j;
  std::vector<std::string> labels(sample_ids.size());
  std::vector<char> set(sample_ids.size(), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto it = index.find(t.rows[r][0]);
    if (it == index.end())
      throw DataError(path + ": unknown sample id '" + t.rows[r][0] + "' at row " +
                      std::to_string(r + 1));
    if (set[it->second])
      throw DataError(path + ": duplicate label for sample '" + t.rows[r][0] + "'");
    labels[it->second] = t.rows[r][1];
    set[it->second] = 1;
  }
  for (std::size_t j = 0; j < sample_ids.size(); ++j)
    if (!set[j]) throw DataError(path + ": no label for sample '" + sample_ids[j] + "'");
  return labels;
}

}  // namespace bicmix::io

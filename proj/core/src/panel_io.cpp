#include "dimm/panel_io.hpp"

#include "dimm/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace dimm {

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  std::size_t line_no = 0;
  char delim = ',';
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (t.header.empty()) {
      if (line.find(',') == std::string::npos && line.find('\t') != std::string::npos) delim = '\t';
      t.header = split(line, delim);
      continue;
    }
    t.rows.push_back(split(line, delim));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw IngestionError("'" + path.string() + "' is empty (no header row)");
  return t;
}

double parse_number(const std::string& cell, const std::string& where) {
  if (cell.empty()) throw IngestionError(where + ": missing value");
  double v = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw IngestionError(where + ": '" + cell + "' is not numeric");
  if (!std::isfinite(v)) throw IngestionError(where + ": non-finite value '" + cell + "'");
  return v;
}

}  // namespace

LoadedPanel load_panel(const std::filesystem::path& response_path, const std::filesystem::path& covariate_path) {
  const auto resp = read_table(response_path);
  const bool has_ids = !resp.header.empty() && resp.header.front() == "subject_id";
  const std::size_t first_col = has_ids ? 1 : 0;
  if (resp.header.size() < first_col + 2) throw IngestionError("response file needs at least 2 response columns");
  const std::size_t m = resp.header.size() - first_col;
  const std::size_t n = resp.rows.size();
  if (n < 2) throw IngestionError("response file needs at least 2 subject rows");

  std::vector<std::string> ids;
  std::map<std::string, std::size_t> id_index;
  MatrixXd y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = resp.rows[i];
    const std::string line = "response file line " + std::to_string(resp.line_numbers[i]);
    if (row.size() != resp.header.size()) {
      std::ostringstream os;
      os << line << ": expected " << resp.header.size() << " columns, found " << row.size();
      throw IngestionError(os.str());
    }
    const std::string id = has_ids ? row.front() : std::to_string(i + 1);
    if (id.empty()) throw IngestionError(line + ": empty subject_id");
    if (!id_index.emplace(id, i).second) throw IngestionError(line + ": duplicate subject_id '" + id + "'");
    ids.push_back(id);
    for (std::size_t c = 0; c < m; ++c) {
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          parse_number(row[first_col + c], line + " (subject " + id + ", column '" + resp.header[first_col + c] + "')");
    }
  }

  const auto cov = read_table(covariate_path);
  if (cov.header.size() < 3 || cov.header[0] != "subject_id" || cov.header[1] != "position") {
    throw IngestionError("covariate file header must start with subject_id,position followed by covariate columns");
  }
  const std::size_t p = cov.header.size() - 2;
  MatrixXd x(static_cast<Eigen::Index>(n * m), static_cast<Eigen::Index>(p));
  std::vector<char> seen(n * m, 0);
  for (std::size_t k = 0; k < cov.rows.size(); ++k) {
    const auto& row = cov.rows[k];
    const std::string line = "covariate file line " + std::to_string(cov.line_numbers[k]);
    if (row.size() < 2) throw IngestionError(line + ": missing subject_id or position");
    const auto it = id_index.find(row[0]);
    if (it == id_index.end()) throw IngestionError(line + ": unknown subject_id '" + row[0] + "'");
    const double pos_raw = parse_number(row[1], line + " (subject " + row[0] + ", position)");
    if (pos_raw != std::floor(pos_raw) || pos_raw < 1.0 || pos_raw > static_cast<double>(m)) {
      std::ostringstream os;
      os << line << " (subject " << row[0] << "): position " << row[1] << " outside 1.." << m;
      throw IngestionError(os.str());
    }
    const auto pos = static_cast<std::size_t>(pos_raw);
    const std::string where = line + " (subject " + row[0] + ", position " + std::to_string(pos) + ")";
    if (row.size() != cov.header.size()) {
      std::ostringstream os;
      os << where << ": expected " << cov.header.size() << " columns, found " << row.size();
      throw IngestionError(os.str());
    }
    const std::size_t slot = it->second * m + (pos - 1);
    if (seen[slot]) throw IngestionError(where + ": duplicate row");
    seen[slot] = 1;
    for (std::size_t c = 0; c < p; ++c) {
      x(static_cast<Eigen::Index>(slot), static_cast<Eigen::Index>(c)) =
          parse_number(row[2 + c], where + ", column '" + cov.header[2 + c] + "'");
    }
  }
  for (std::size_t slot = 0; slot < seen.size(); ++slot) {
    if (!seen[slot]) {
      std::ostringstream os;
      os << "covariate file has no row for subject " << ids[slot / m] << ", position " << (slot % m) + 1;
      throw IngestionError(os.str());
    }
  }

  LoadedPanel out{PanelDataset(std::move(y), std::move(x)), std::move(ids),
                  std::vector<std::string>(resp.header.begin() + static_cast<std::ptrdiff_t>(first_col), resp.header.end()),
                  std::vector<std::string>(cov.header.begin() + 2, cov.header.end())};
  return out;
}

void save_panel(const PanelDataset& data, const std::filesystem::path& response_path,
                const std::filesystem::path& covariate_path, const std::vector<std::string>& covariate_names) {
  const auto n = data.n_subjects();
  const auto m = data.response_dim();
  const auto p = data.n_covariates();
  if (!covariate_names.empty() && covariate_names.size() != p) {
    throw IngestionError("save_panel: covariate_names must have one entry per covariate");
  }
  std::ofstream ry(response_path);
  std::ofstream rx(covariate_path);
  if (!ry || !rx) throw IngestionError("save_panel: cannot open output files");
  ry << std::setprecision(std::numeric_limits<double>::max_digits10);
  rx << std::setprecision(std::numeric_limits<double>::max_digits10);

  ry << "subject_id";
  for (std::size_t c = 0; c < m; ++c) ry << ",y" << c + 1;
  ry << '\n';
  rx << "subject_id,position";
  for (std::size_t c = 0; c < p; ++c) rx << ',' << (covariate_names.empty() ? "x" + std::to_string(c + 1) : covariate_names[c]);
  rx << '\n';

  for (std::size_t i = 0; i < n; ++i) {
    ry << i + 1;
    for (std::size_t c = 0; c < m; ++c) ry << ',' << data.responses()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
    ry << '\n';
    const auto xi = data.subject_covariates(i);
    for (std::size_t r = 0; r < m; ++r) {
      rx << i + 1 << ',' << r + 1;
      for (std::size_t c = 0; c < p; ++c) rx << ',' << xi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      rx << '\n';
    }
  }
}

PanelDataset with_intercept(const PanelDataset& data) {
  const auto& x = data.covariates();
  MatrixXd xi(x.rows(), x.cols() + 1);
  xi.col(0).setOnes();
  xi.rightCols(x.cols()) = x;
  return PanelDataset(data.responses(), std::move(xi));
}

}  // namespace dimm

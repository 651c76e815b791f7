#include "qsmooth/estimate_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qsmooth/csv_format.hpp"

namespace qsmooth {

namespace {

constexpr std::string_view kEstimateSchema = "qsmooth.estimate/1";
constexpr std::string_view kSnapshotFormat = "qsmooth.snapshot/1";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string idx(std::string_view name, Eigen::Index i) {
  return std::string(name) + "[" + std::to_string(i) + "]";
}

std::string value_after(std::string_view line, std::string_view key) {
  const auto pos = line.find(key);
  if (pos == std::string_view::npos) return {};
  const auto start = pos + key.size();
  const auto end = line.find(' ', start);
  return std::string(line.substr(start, end == std::string_view::npos ? end : end - start));
}

}  // namespace

void write_estimate_csv(const std::filesystem::path& path, const std::vector<EstimateRow>& rows,
                        std::string_view scenario_hash) {
  if (rows.empty()) throw std::invalid_argument("write_estimate_csv: no rows");
  const auto n = rows.front().x_mean.size();
  Eigen::Index k = 0;
  for (const auto& r : rows) {
    if (r.x_mean.size() != n || r.x_cov.rows() != n || r.x_cov.cols() != n) {
      throw std::invalid_argument("write_estimate_csv: rows disagree on the state dimension");
    }
    if (r.density) {
      if (k != 0 && r.density->size() != k) {
        throw std::invalid_argument("write_estimate_csv: density rows of different length");
      }
      k = r.density->size();
    }
  }

  auto out = open_out(path);
  out << "# schema=" << kEstimateSchema << " scenario_hash=" << scenario_hash
      << " tool=qsmooth " << kToolVersion << '\n';
  std::vector<std::string> cells{"t"};
  for (Eigen::Index i = 0; i < n; ++i) cells.push_back(idx("x_mean", i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) cells.push_back(idx(idx("x_cov", i), j));
  }
  cells.push_back("log_likelihood");
  cells.push_back("estimator");
  for (Eigen::Index i = 0; i < k; ++i) cells.push_back(idx("h", i));
  out << join_csv(cells) << '\n';

  for (const auto& r : rows) {
    cells.clear();
    cells.push_back(format_double(r.t));
    for (Eigen::Index i = 0; i < n; ++i) cells.push_back(format_double(r.x_mean(i)));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) cells.push_back(format_double(r.x_cov(i, j)));
    }
    cells.push_back(format_double(r.log_likelihood));
    cells.push_back(r.estimator);
    for (Eigen::Index i = 0; i < k; ++i) {
      cells.push_back(r.density ? format_double((*r.density)(i)) : std::string());
    }
    out << join_csv(cells) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EstimateTable read_estimate_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  EstimateTable table;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing schema line");
  }
  if (value_after(line, "schema=") != kEstimateSchema) {
    throw std::runtime_error(path.string() + ": unsupported schema");
  }
  table.scenario_hash = value_after(line, "scenario_hash=");
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  for (auto c : split_csv_line(line)) table.columns.emplace_back(c);

  Eigen::Index n = 0, k = 0;
  for (const auto& c : table.columns) {
    if (c.rfind("x_mean[", 0) == 0) ++n;
    if (c.rfind("h[", 0) == 0) ++k;
  }
  const std::size_t width = static_cast<std::size_t>(1 + n + n * n + 2 + k);
  if (table.columns.size() != width) throw std::runtime_error(path.string() + ": bad header");

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != width) throw std::runtime_error(path.string() + ": ragged row");
    EstimateRow r;
    std::size_t c = 0;
    r.t = parse_double(cells[c++]);
    r.x_mean.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) r.x_mean(i) = parse_double(cells[c++]);
    r.x_cov.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) r.x_cov(i, j) = parse_double(cells[c++]);
    }
    r.log_likelihood = parse_double(cells[c++]);
    r.estimator = std::string(cells[c++]);
    if (k > 0 && !cells[c].empty()) {
      RVec h(k);
      for (Eigen::Index i = 0; i < k; ++i) h(i) = parse_double(cells[c + static_cast<std::size_t>(i)]);
      r.density = std::move(h);
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_snapshot(const std::filesystem::path& path, const OperatorField& field,
                    std::string_view direction) {
  auto out = open_out(path);
  const int d = field.dim();
  out << "# " << kSnapshotFormat << " direction=" << direction << '\n';
  out << "t=" << format_double(field.t) << '\n';
  out << "log_weight=" << format_double(field.log_weight) << '\n';
  out << "grid_points=" << field.size() << " dim=" << d << '\n';
  for (const auto& b : field.blocks) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        out << (j ? " " : "") << format_double(b(i, j).real()) << ' '
            << format_double(b(i, j).imag());
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Snapshot s;
  std::string line;
  std::getline(in, line);
  if (line.find(kSnapshotFormat) == std::string::npos) {
    throw std::runtime_error(path.string() + ": not a snapshot file");
  }
  s.direction = value_after(line, "direction=");
  std::getline(in, line);
  s.t = parse_double(value_after(line, "t="));
  std::getline(in, line);
  s.log_weight = parse_double(value_after(line, "log_weight="));
  std::getline(in, line);
  const auto points = std::stoul(value_after(line, "grid_points="));
  const int d = std::stoi(value_after(line, "dim="));
  for (std::size_t k = 0; k < points; ++k) {
    CMat b(d, d);
    for (int i = 0; i < d; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": truncated");
      std::istringstream row(line);
      for (int j = 0; j < d; ++j) {
        std::string re, im;
        row >> re >> im;
        b(i, j) = Complex(parse_double(re), parse_double(im));
      }
    }
    s.blocks.push_back(std::move(b));
  }
  return s;
}

}  // namespace qsmooth

#include "qsmooth/record_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "qsmooth/csv_format.hpp"

namespace qsmooth {

namespace {

constexpr const char* kRecordFormat = "qsmooth.record/1";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::filesystem::path record_csv_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".csv");
}

std::filesystem::path record_meta_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".meta.json");
}

void write_record(const TrajectoryRecord& record, const std::filesystem::path& stem) {
  record.validate();
  const auto n = record.x_initial.size();
  const auto m = record.dy.empty() ? Eigen::Index{0} : record.dy.front().size();
  {
    auto out = open_out(record_csv_path(stem));
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("x_true[" + std::to_string(i) + "]");
    for (Eigen::Index i = 0; i < m; ++i) header.push_back("dy[" + std::to_string(i) + "]");
    out << join_csv(header) << '\n';
    std::vector<std::string> cells;
    for (std::size_t r = 0; r < record.steps(); ++r) {
      cells.clear();
      cells.push_back(format_double(record.time(r)));
      for (Eigen::Index i = 0; i < n; ++i) cells.push_back(format_double(record.x_true[r](i)));
      for (Eigen::Index i = 0; i < m; ++i) cells.push_back(format_double(record.dy[r](i)));
      out << join_csv(cells) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + record_csv_path(stem).string());
  }
  nlohmann::json meta;
  meta["format"] = kRecordFormat;
  meta["tool_version"] = kToolVersion;
  meta["scenario_id"] = record.scenario_id;
  meta["scenario_hash"] = record.scenario_hash;
  meta["seed"] = record.seed;
  meta["t0"] = format_double(record.t0);
  meta["T"] = format_double(record.T);
  meta["dt"] = format_double(record.dt);
  meta["steps"] = record.steps();
  meta["state_dim"] = n;
  meta["channels"] = m;
  meta["x_initial"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < n; ++i) meta["x_initial"].push_back(format_double(record.x_initial(i)));
  auto out = open_out(record_meta_path(stem));
  out << meta.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + record_meta_path(stem).string());
}

TrajectoryRecord read_record(const std::filesystem::path& stem) {
  std::ifstream meta_in(record_meta_path(stem));
  if (!meta_in) throw std::runtime_error("cannot open " + record_meta_path(stem).string());
  const auto meta = nlohmann::json::parse(meta_in);
  if (meta.value("format", "") != kRecordFormat) {
    throw std::runtime_error("unsupported record format in " + record_meta_path(stem).string());
  }
  TrajectoryRecord rec;
  rec.scenario_id = meta.at("scenario_id").get<std::string>();
  rec.scenario_hash = meta.at("scenario_hash").get<std::string>();
  rec.seed = meta.at("seed").get<std::uint64_t>();
  rec.t0 = parse_double(meta.at("t0").get<std::string>());
  rec.T = parse_double(meta.at("T").get<std::string>());
  rec.dt = parse_double(meta.at("dt").get<std::string>());
  const auto n = meta.at("state_dim").get<Eigen::Index>();
  const auto m = meta.at("channels").get<Eigen::Index>();
  const auto steps = meta.at("steps").get<std::size_t>();
  rec.x_initial.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rec.x_initial(i) = parse_double(meta.at("x_initial").at(static_cast<std::size_t>(i)).get<std::string>());
  }

  std::ifstream in(record_csv_path(stem));
  if (!in) throw std::runtime_error("cannot open " + record_csv_path(stem).string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("record CSV is empty");
  const auto header = split_csv_line(line);
  if (static_cast<Eigen::Index>(header.size()) != 1 + n + m || header[0] != "t") {
    throw std::runtime_error("record CSV header does not match metadata");
  }
  rec.x_true.reserve(steps);
  rec.dy.reserve(steps);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != 1 + n + m) {
      throw std::runtime_error("record CSV row " + std::to_string(row) + " has the wrong width");
    }
    RVec x(n), dy(m);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = parse_double(cells[1 + i]);
    for (Eigen::Index i = 0; i < m; ++i) dy(i) = parse_double(cells[1 + n + i]);
    rec.x_true.push_back(std::move(x));
    rec.dy.push_back(std::move(dy));
    ++row;
  }
  if (row != steps) throw std::runtime_error("record CSV row count does not match metadata");
  rec.validate();
  return rec;
}

}  // namespace qsmooth

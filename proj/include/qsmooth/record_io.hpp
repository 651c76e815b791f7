#pragma once

#include <filesystem>

#include "qsmooth/truth_simulator.hpp"

namespace qsmooth {

/// Writes `<stem>.csv` (header "t,x_true[0],..,dy[0],..", one row per
/// increment, shortest round-trip decimals) and `<stem>.meta.json` (seed,
/// time grid, scenario id and hash, x_initial, tool version).
void write_record(const TrajectoryRecord& record, const std::filesystem::path& stem);

/// Reads a record written by write_record; values round-trip bit-exactly.
TrajectoryRecord read_record(const std::filesystem::path& stem);

std::filesystem::path record_csv_path(const std::filesystem::path& stem);
std::filesystem::path record_meta_path(const std::filesystem::path& stem);

}  // namespace qsmooth

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsmooth/hybrid_field.hpp"

namespace qsmooth {

/// One row of the shared estimate schema.
struct EstimateRow {
  double t = 0.0;
  RVec x_mean;
  RMat x_cov;
  double log_likelihood = 0.0;
  std::string estimator;
  std::optional<RVec> density;  // h (or p_x) on the grid, when requested
};

/// First line "# schema=qsmooth.estimate/1 scenario_hash=<h> tool=qsmooth
/// <version>", then the header
/// "t,x_mean[i]..,x_cov[i][j]..,log_likelihood,estimator[,h[k]..]".
/// Density columns are written when any row carries one; rows without a
/// density leave those cells empty.
void write_estimate_csv(const std::filesystem::path& path, const std::vector<EstimateRow>& rows,
                        std::string_view scenario_hash);

struct EstimateTable {
  std::string scenario_hash;
  std::vector<std::string> columns;
  std::vector<EstimateRow> rows;
};

EstimateTable read_estimate_csv(const std::filesystem::path& path);

/// Portable text snapshot: a comment line with the format and direction,
/// "t=", "log_weight=", "grid_points= dim=", then each block as dim rows of
/// "re im" pairs.
void write_snapshot(const std::filesystem::path& path, const OperatorField& field,
                    std::string_view direction);

struct Snapshot {
  std::string direction;
  double t = 0.0;
  double log_weight = 0.0;
  std::vector<CMat> blocks;
};

Snapshot read_snapshot(const std::filesystem::path& path);

}  // namespace qsmooth

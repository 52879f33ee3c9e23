#pragma once

#include <string>
#include <vector>

#include "meshloc/pose/solver.hpp"

namespace meshloc::io {

/// Tab-separated benchmark table, one data row per method, columns named
/// after the published benchmark: Score, DCRE(0.05), DCRE(0.15),
/// Pose(0.05m,5deg), Outlier(0.5), NaN.
struct ReportRow {
  std::string method;
  pose::BenchmarkRecord record;
};

void write_metrics_report(const std::string& path, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_metrics_report(const std::string& path);

}  // namespace meshloc::io

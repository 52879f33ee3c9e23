#include "meshloc/io/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "meshloc/common/errors.hpp"

namespace meshloc::io {

namespace {
const char* kHeader = "Method\tScore\tDCRE(0.05)\tDCRE(0.15)\tPose(0.05m,5deg)\tOutlier(0.5)\tNaN";
}

void write_metrics_report(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << kHeader << "\n";
  char buf[256];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f",
                  row.method.c_str(), row.record.score, row.record.dcre_005, row.record.dcre_015,
                  row.record.pose_005_5deg, row.record.outlier_05, row.record.nan_rate);
    os << buf << "\n";
  }
  if (!os) throw DataError(path + ": write failed");
}

std::vector<ReportRow> read_metrics_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open");
  std::string line;
  if (!std::getline(is, line) || line != kHeader)
    throw DataError(path + ": unexpected metrics header '" + line + "'");
  std::vector<ReportRow> rows;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ReportRow row;
    if (!std::getline(ls, row.method, '\t')) throw ParseError(path, line_no, "missing method");
    if (!(ls >> row.record.score >> row.record.dcre_005 >> row.record.dcre_015 >>
          row.record.pose_005_5deg >> row.record.outlier_05 >> row.record.nan_rate))
      throw ParseError(path, line_no, "expected six metric values");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace meshloc::io

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace jointbe::csv {

/// Scientific notation with 17 significant digits, '.' decimal separator.
std::string sci(double v);

/// Opens `path` for writing or throws Error(io).
std::ofstream open_output(const std::filesystem::path& path);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  int column(std::string_view name) const;  // -1 if absent
};

/// Reads a comma-separated file with a header row. When `expected_header` is
/// non-empty the header must match it exactly.
Table read(const std::filesystem::path& path,
           const std::vector<std::string>& expected_header = {});

/// Parses a double, throwing Error(input) naming the file/line on failure.
double to_double(const std::string& cell, const std::filesystem::path& path, int line);
long to_long(const std::string& cell, const std::filesystem::path& path, int line);

}  // namespace jointbe::csv

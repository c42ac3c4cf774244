#include "jointbe/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "jointbe/error.hpp"

namespace jointbe {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::input: return "input";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::solver: return "solver";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

namespace csv {

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot open " + path.string() + " for writing");
  return out;
}

int Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  Table t;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      if (!expected_header.empty() && t.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw Error(ErrorCategory::input,
                    path.string() + ":1: unexpected CSV header, expected `" + want + "`");
      }
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCategory::input, path.string() + ":" + std::to_string(line_no) +
                                            ": expected " + std::to_string(t.header.size()) +
                                            " columns");
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCategory::input, path.string() + ": empty CSV file");
  return t;
}

double to_double(const std::string& cell, const std::filesystem::path& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCategory::input,
              path.string() + ":" + std::to_string(line) + ": not a number: `" + cell + "`");
}

long to_long(const std::string& cell, const std::filesystem::path& path, int line) {
  long v = 0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCategory::input,
                path.string() + ":" + std::to_string(line) + ": not an integer: `" + cell + "`");
  }
  return v;
}

}  // namespace csv
}  // namespace jointbe

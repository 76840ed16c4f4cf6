#include "plfam/csv.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include "plfam/util.hpp"

namespace plfam {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void fail(const std::string& path, std::size_t line,
                       const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_real(const std::string& path, std::size_t line,
                  const std::string& field) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    fail(path, line, "cannot parse '" + field + "' as a real number");
  return value;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty()) throw DataError(path + ": file is empty");
  return lines;
}

bool is_id_column(const std::string& name) { return name == "id"; }

}  // namespace

CsvTable read_csv_table(const std::string& path) {
  const auto lines = read_lines(path);
  auto header = split_line(lines[0]);
  if (header.empty() || header[0].empty())
    fail(path, 1, "missing header row");

  CsvTable table;
  const bool has_id = is_id_column(header[0]);
  const std::size_t first_value = has_id ? 1 : 0;
  if (header.size() <= first_value) fail(path, 1, "no value columns");
  for (std::size_t c = first_value; c < header.size(); ++c) {
    if (header[c].empty()) fail(path, 1, "empty column name");
    table.columns.push_back(header[c]);
  }

  const Index n_rows = static_cast<Index>(lines.size()) - 1;
  if (n_rows == 0) fail(path, 1, "no data rows");
  table.values.resize(n_rows, static_cast<Index>(table.columns.size()));
  for (Index i = 0; i < n_rows; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    auto fields = split_line(lines[line_no - 1]);
    if (fields.size() != header.size())
      fail(path, line_no,
           "expected " + std::to_string(header.size()) + " fields, got " +
               std::to_string(fields.size()));
    if (has_id) table.ids.push_back(fields[0]);
    for (std::size_t c = first_value; c < fields.size(); ++c)
      table.values(i, static_cast<Index>(c - first_value)) =
          parse_real(path, line_no, fields[c]);
  }
  return table;
}

std::string render_csv_table(const CsvTable& table) {
  const bool has_id = !table.ids.empty();
  std::string out;
  if (has_id) out += "id,";
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (Index i = 0; i < table.values.rows(); ++i) {
    if (has_id) out += table.ids[static_cast<std::size_t>(i)] + ",";
    for (Index c = 0; c < table.values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(table.values(i, c));
    }
    out += '\n';
  }
  return out;
}

FunctionalTable read_functional_csv(const std::string& path) {
  const auto lines = read_lines(path);
  auto header = split_line(lines[0]);
  if (header.size() < 3 || !is_id_column(header[0]))
    fail(path, 1,
         "functional header must be id followed by at least two grid values");

  Vector grid(static_cast<Index>(header.size()) - 1);
  for (std::size_t c = 1; c < header.size(); ++c) {
    std::string name = header[c];
    if (name.rfind("t_", 0) == 0) name = name.substr(2);
    grid[static_cast<Index>(c) - 1] = parse_real(path, 1, name);
  }
  for (Index j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1]))
      fail(path, 1, "grid column names must be strictly increasing");

  const Index n_rows = static_cast<Index>(lines.size()) - 1;
  if (n_rows == 0) fail(path, 1, "no data rows");
  Matrix values(n_rows, grid.size());
  FunctionalTable table;
  for (Index i = 0; i < n_rows; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    auto fields = split_line(lines[line_no - 1]);
    if (fields.size() != header.size())
      fail(path, line_no,
           "expected " + std::to_string(header.size()) + " fields, got " +
               std::to_string(fields.size()));
    table.ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c)
      values(i, static_cast<Index>(c) - 1) =
          parse_real(path, line_no, fields[c]);
  }
  table.data = make_dataset(grid, std::move(values));
  return table;
}

std::string render_functional_csv(const FunctionalTable& table) {
  std::string out = "id";
  for (Index j = 0; j < table.data.grid.size(); ++j)
    out += "," + format_double(table.data.grid[j]);
  out += '\n';
  for (Index i = 0; i < table.data.values.rows(); ++i) {
    out += table.ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < table.data.values.cols(); ++j)
      out += "," + format_double(table.data.values(i, j));
    out += '\n';
  }
  return out;
}

ResponseTable read_response_csv(const std::string& path) {
  CsvTable raw = read_csv_table(path);
  if (raw.columns.size() != 1)
    throw DataError(path + ": response file must have exactly one value "
                           "column, found " +
                    std::to_string(raw.columns.size()));
  ResponseTable table;
  table.column = raw.columns[0];
  table.ids = std::move(raw.ids);
  table.values = raw.values.col(0);
  return table;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
    throw DataError("cannot move '" + tmp.string() + "' to '" + path +
                    "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace plfam

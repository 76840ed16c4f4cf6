#pragma once

#include <string>
#include <vector>

#include "plfam/fpca.hpp"
#include "plfam/types.hpp"

namespace plfam {

// Numeric table with named columns. A leading "id" column is split off and
// kept verbatim as strings; it never enters the value matrix.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::string> ids;  // empty when the file has no id column
  Matrix values;
};

// Strict comma-separated parsing: no quoting, no locale grouping, decimal
// reals via from_chars. Errors carry the 1-based line number and the file
// path.
CsvTable read_csv_table(const std::string& path);
std::string render_csv_table(const CsvTable& table);

// Functional data file: header `id,<t_1>,...,<t_N>` where the curve column
// names are the grid values themselves (an optional "t_" prefix is
// tolerated). One row per curve.
struct FunctionalTable {
  std::vector<std::string> ids;
  FunctionalDataset data;
};

FunctionalTable read_functional_csv(const std::string& path);
std::string render_functional_csv(const FunctionalTable& table);

// Response file: one numeric column (any name) besides the optional id.
struct ResponseTable {
  std::string column;
  std::vector<std::string> ids;
  Vector values;
};

ResponseTable read_response_csv(const std::string& path);

// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace plfam

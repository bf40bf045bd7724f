#pragma once

// Dataset files and p-value curve files.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pvalfn/model.hpp"

namespace pvalfn::io {

/// A numeric table: named columns, '#' comment lines skipped.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a named column, or -1.
  int find(const std::string& name) const;
  std::vector<double> column(std::size_t j) const;
};

Table read_table(std::istream& in);
Table read_table_file(const std::string& path);

/// Inline data: "1,2,3" is one column; "1,2;3,4" is rows separated by ';'.
Table parse_inline(const std::string& text, const std::vector<std::string>& columns);

/// Map a table onto a model's data columns, by header name when the names
/// match and by position otherwise.
DataSet to_dataset(const Table& table, const std::vector<std::string>& columns);

/// SHA-256 of the dataset's canonical text form, as lowercase hex.
std::string data_digest(const DataSet& y);

/// Shortest text that parses back to the same double.
std::string format_double(double x);

struct CurveFile {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;  // theta labels..., p, std_err
  std::vector<std::vector<double>> rows;

  bool operator==(const CurveFile&) const = default;
};

void write_curve_csv(std::ostream& out, const CurveFile& file);
void write_curve_json(std::ostream& out, const CurveFile& file);
CurveFile read_curve_csv(std::istream& in);
CurveFile read_curve_json(std::istream& in);

}  // namespace pvalfn::io

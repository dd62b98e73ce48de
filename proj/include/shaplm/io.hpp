#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace shaplm {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric CSV with a header row. Rows are stored row-major in `values`.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;

  /// Index of a named column, or -1.
  int column(const std::string& name) const;
  /// Index of a named column; throws ParseError naming the file when absent.
  int require(const std::string& name, const std::string& source) const;
};

/// Parses numeric CSV text. Errors carry the 1-based line number.
CsvTable parse_csv(const std::string& text, const std::string& source = "<csv>");
CsvTable read_csv(const std::string& path);

/// Writes with `%.17g` so values round-trip exactly.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

std::string format_double(double v);

}  // namespace shaplm

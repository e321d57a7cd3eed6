#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace xsect::csv {

// Minimal reader for the plain comma-separated files used by the engine:
// no quoting, header row required, blank lines skipped.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  // Index of a named header column; throws ParseError when absent.
  std::size_t column(std::string_view name) const;
  void require_columns(const std::vector<std::string_view>& names) const;

  bool next();
  const std::vector<std::string>& row() const { return row_; }
  std::size_t line() const { return line_; }

  // Parse helpers that throw ParseError naming file and line.
  double number(std::size_t col) const;
  // Empty cell yields NaN.
  double optional_number(std::size_t col) const;
  const std::string& text(std::size_t col) const;
  std::string where() const;

 private:
  std::filesystem::path path_;
  std::vector<std::string> lines_;
  std::size_t cursor_ = 0;
  std::vector<std::string> header_;
  std::vector<std::string> row_;
  std::size_t line_ = 0;
};

std::vector<std::string> split(std::string_view line, char sep = ',');

// Shortest representation that round-trips through strtod; NaN -> "".
std::string format_double(double value);
std::string format_double_or(double value, std::string_view missing);

}  // namespace xsect::csv

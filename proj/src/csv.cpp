#include "xsect/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xsect/error.hpp"

namespace xsect::csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines_.push_back(std::move(line));
  }
  while (cursor_ < lines_.size() && lines_[cursor_].empty()) ++cursor_;
  if (cursor_ == lines_.size()) throw ParseError(path_.string() + ": missing header row");
  std::string head = lines_[cursor_];
  if (head.size() >= 3 && head.compare(0, 3, "\xEF\xBB\xBF") == 0) head.erase(0, 3);
  header_ = split(head);
  line_ = ++cursor_;
}

std::size_t Reader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw ParseError(path_.string() + ": missing column '" + std::string(name) + "'");
}

void Reader::require_columns(const std::vector<std::string_view>& names) const {
  for (auto n : names) (void)column(n);
}

bool Reader::next() {
  while (cursor_ < lines_.size() && lines_[cursor_].empty()) ++cursor_;
  if (cursor_ >= lines_.size()) return false;
  row_ = split(lines_[cursor_]);
  line_ = ++cursor_;
  if (row_.size() != header_.size()) {
    std::ostringstream msg;
    msg << where() << ": expected " << header_.size() << " fields, got " << row_.size();
    throw ParseError(msg.str());
  }
  return true;
}

std::string Reader::where() const { return path_.string() + ":" + std::to_string(line_); }

const std::string& Reader::text(std::size_t col) const { return row_.at(col); }

double Reader::number(std::size_t col) const {
  const std::string& cell = row_.at(col);
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError(where() + ": bad number '" + cell + "' in column '" + header_.at(col) + "'");
  }
  return value;
}

double Reader::optional_number(std::size_t col) const {
  if (row_.at(col).empty()) return std::nan("");
  return number(col);
}

std::string format_double(double value) { return format_double_or(value, ""); }

std::string format_double_or(double value, std::string_view missing) {
  if (std::isnan(value)) return std::string(missing);
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace xsect::csv

#include "xsect/calendar.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "xsect/error.hpp"

namespace xsect {
namespace {

std::optional<std::chrono::year_month_day> parse_ymd(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (text[i] < '0' || text[i] > '9') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
    return v;
  };
  const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)},
                                        std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                        std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::string format_ymd(const std::chrono::year_month_day& ymd) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

bool is_iso_date(std::string_view text) { return parse_ymd(text).has_value(); }

TradingCalendar::TradingCalendar(std::vector<std::string> days) : days_(std::move(days)) {
  if (days_.empty()) throw ValidationError("trading calendar is empty");
  index_.reserve(days_.size());
  for (std::size_t i = 0; i < days_.size(); ++i) {
    if (!is_iso_date(days_[i]))
      throw ValidationError("calendar day '" + days_[i] + "' is not an ISO date");
    if (i > 0 && !(days_[i - 1] < days_[i]))
      throw ValidationError("calendar not strictly increasing at '" + days_[i] + "'");
    index_.emplace(days_[i], i);
  }
  last_month_end_.assign(days_.size(), -1);
  std::ptrdiff_t last = -1;
  for (std::size_t i = 0; i < days_.size(); ++i) {
    if (is_month_end(i)) last = static_cast<std::ptrdiff_t>(i);
    last_month_end_[i] = last;
  }
}

std::optional<std::size_t> TradingCalendar::find(std::string_view date) const {
  auto it = index_.find(std::string(date));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TradingCalendar::index_of(std::string_view date) const {
  if (auto i = find(date)) return *i;
  throw ValidationError("date '" + std::string(date) + "' is not on the trading calendar");
}

std::size_t TradingCalendar::lower_bound(std::string_view date) const {
  auto it = std::lower_bound(days_.begin(), days_.end(), date,
                             [](const std::string& a, std::string_view b) { return a < b; });
  return static_cast<std::size_t>(it - days_.begin());
}

bool TradingCalendar::is_month_end(std::size_t index) const {
  if (index + 1 >= days_.size()) return false;
  // Same "YYYY-MM" prefix means same month.
  return days_[index].compare(0, 7, days_[index + 1], 0, 7) != 0;
}

std::optional<std::size_t> TradingCalendar::month_end_at_or_before(std::size_t index) const {
  const auto v = last_month_end_.at(index);
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

std::vector<std::string> weekdays_from(std::string_view start, std::size_t count) {
  auto ymd = parse_ymd(start);
  if (!ymd) throw ValidationError("bad start date '" + std::string(start) + "'");
  std::chrono::sys_days day{*ymd};
  std::vector<std::string> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday)
      out.push_back(format_ymd(std::chrono::year_month_day{day}));
    day += std::chrono::days{1};
  }
  return out;
}

}  // namespace xsect

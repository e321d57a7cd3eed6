#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xsect {

// True for a valid proleptic-Gregorian YYYY-MM-DD string.
bool is_iso_date(std::string_view text);

// Ordered business days. All daily series in the engine are indexed by
// position on this calendar; horizons are counted in calendar positions.
class TradingCalendar {
 public:
  TradingCalendar() = default;
  // Throws ValidationError unless days are non-empty, ISO formatted and
  // strictly increasing.
  explicit TradingCalendar(std::vector<std::string> days);

  std::size_t size() const { return days_.size(); }
  bool empty() const { return days_.empty(); }
  const std::string& date(std::size_t index) const { return days_.at(index); }
  std::span<const std::string> days() const { return days_; }

  std::optional<std::size_t> find(std::string_view date) const;
  // Throws ValidationError when the date is not a calendar day.
  std::size_t index_of(std::string_view date) const;
  // First position whose date is >= the argument (size() when none).
  std::size_t lower_bound(std::string_view date) const;

  // Last trading day of its month; the final calendar day never qualifies
  // because the calendar cannot tell whether its month continues.
  bool is_month_end(std::size_t index) const;
  // Most recent month-end at or before index.
  std::optional<std::size_t> month_end_at_or_before(std::size_t index) const;

  friend bool operator==(const TradingCalendar& a, const TradingCalendar& b) {
    return a.days_ == b.days_;
  }

 private:
  std::vector<std::string> days_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::ptrdiff_t> last_month_end_;
};

// Consecutive Monday-to-Friday dates starting at the first weekday >= start.
std::vector<std::string> weekdays_from(std::string_view start, std::size_t count);

}  // namespace xsect

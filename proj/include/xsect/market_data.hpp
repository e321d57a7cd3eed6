#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xsect/calendar.hpp"

namespace xsect {

// Minimum number of trading days before `day` for which closes and volumes
// must exist; the longest factor horizon.
inline constexpr std::size_t kFactorHistory = 60;

struct FundamentalRecord {
  std::string month_end;
  double net_assets = 0;
  double net_profits = 0;
  double dividends = 0;
  double sales = 0;
  double operating_cashflow = 0;
  double total_assets = 0;
  double current_assets = 0;
  double current_liabilities = 0;
  double debt = 0;
  double net_operating_profit = 0;
  double nopat = 0;
  double capex = 0;
  double tangible_fixed_payments = 0;
  double depreciation = 0;
  double delta_working_capital = 0;

  friend bool operator==(const FundamentalRecord&, const FundamentalRecord&) = default;
};

// Column order of fundamentals.csv after stock_id and month_end_date.
const std::vector<std::string>& fundamental_field_names();

// Aligned raw inputs. Matrices are stocks x calendar days; NaN marks an
// absent value. Stocks are sorted lexicographically and that order is the
// canonical tie-break order everywhere downstream. Immutable once loaded.
struct MarketPanel {
  TradingCalendar calendar;
  std::vector<std::string> stocks;

  Eigen::MatrixXd open;
  Eigen::MatrixXd close;
  Eigen::MatrixXd volume;
  Eigen::MatrixXd shares_outstanding;
  Eigen::MatrixXd op_income_forecast;
  Eigen::MatrixXd target_price_forecast;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> member;

  // Per stock, sorted by month_end. visible_from[s][k] is the first
  // calendar position at which record k may be used.
  std::vector<std::vector<FundamentalRecord>> fundamentals;
  std::vector<std::vector<std::size_t>> visible_from;

  std::size_t n_stocks() const { return stocks.size(); }
  std::size_t n_days() const { return calendar.size(); }
  std::optional<std::size_t> stock_index(std::string_view id) const;

  // Index of the latest fundamental record usable at `day`.
  std::optional<std::size_t> fundamentals_asof(std::size_t stock, std::size_t day) const;

  // Allocate NaN-filled matrices for the given stocks (sorted in place).
  void reset(TradingCalendar cal, std::vector<std::string> ids);
  // Recompute visible_from using a publication lag in trading days.
  void index_fundamentals(std::size_t lag_days);
};

// Exact equality, treating NaN == NaN.
bool identical(const MarketPanel& a, const MarketPanel& b);

struct PanelPaths {
  std::filesystem::path prices;
  std::filesystem::path fundamentals;  // optional (empty path)
  std::filesystem::path forecasts;     // optional
  std::filesystem::path membership;    // optional: absent means every priced day is a member

  static PanelPaths in_directory(const std::filesystem::path& dir);
};

struct LoadOptions {
  std::size_t fundamentals_lag_days = 0;
};

// Sorted distinct dates of prices.csv.
TradingCalendar calendar_from_prices(const std::filesystem::path& prices);

MarketPanel load_panel(const PanelPaths& paths, const TradingCalendar& calendar,
                       const LoadOptions& options = {});
MarketPanel load_panel(const PanelPaths& paths, const LoadOptions& options = {});

// Runs the structural checks performed at load time on an in-memory panel.
void validate_panel(const MarketPanel& panel);

// Writes prices.csv, fundamentals.csv, forecasts.csv and membership.csv.
void write_panel(const MarketPanel& panel, const std::filesystem::path& dir);

struct Universe {
  std::size_t day = 0;
  std::vector<std::size_t> stocks;  // panel indices, ascending == id order

  std::size_t size() const { return stocks.size(); }
  bool empty() const { return stocks.empty(); }
};

// True when the stock is a member at `day` and has closes and volumes for
// the kFactorHistory trading days before it.
bool in_universe(const MarketPanel& panel, std::size_t stock, std::size_t day);
Universe universe_at(const MarketPanel& panel, std::size_t day);
Universe universe_at(const MarketPanel& panel, std::string_view date);

}  // namespace xsect

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "xsect/market_data.hpp"

namespace xsect::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("xsect-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string stock_name(std::size_t i) {
  std::string d = std::to_string(i + 1);
  return "A" + std::string(3 - std::min<std::size_t>(3, d.size()), '0') + d;
}

// Every stock a member on every day with flat open = close = 100,
// volume 1000, 1e6 shares and flat forecasts. `fundamentals` adds one
// record per month-end so all 33 factors are defined.
inline MarketPanel flat_panel(std::size_t n_stocks, std::size_t n_days, bool fundamentals = true) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n_stocks; ++i) ids.push_back(stock_name(i));
  MarketPanel p;
  p.reset(TradingCalendar(weekdays_from("2015-01-05", n_days)), ids);
  p.member.setConstant(true);
  p.open.setConstant(100.0);
  p.close.setConstant(100.0);
  p.volume.setConstant(1000.0);
  p.shares_outstanding.setConstant(1e6);
  p.op_income_forecast.setConstant(50.0);
  p.target_price_forecast.setConstant(120.0);
  if (fundamentals) {
    for (std::size_t s = 0; s < n_stocks; ++s)
      for (std::size_t d = 0; d < n_days; ++d) {
        if (!p.calendar.is_month_end(d)) continue;
        FundamentalRecord r;
        r.month_end = p.calendar.date(d);
        const double k = 1.0 + 0.1 * static_cast<double>(s);
        r.net_assets = 5e7 * k;
        r.net_profits = 4e6 * k;
        r.dividends = 1e6;
        r.sales = 9e7;
        r.operating_cashflow = 6e6;
        r.total_assets = 2e8 * k;
        r.current_assets = 6e7;
        r.current_liabilities = 4e7;
        r.debt = 3e7;
        r.net_operating_profit = 8e6;
        r.nopat = 5.6e6;
        r.capex = 2e6 * k;
        r.tangible_fixed_payments = 1e6;
        r.depreciation = 1.5e6;
        r.delta_working_capital = 2e5;
        p.fundamentals[s].push_back(r);
      }
    p.index_fundamentals(0);
  }
  return p;
}

// Flat panel with independent lognormal daily moves on opens and closes.
inline MarketPanel random_panel(std::size_t n_stocks, std::size_t n_days, std::uint64_t seed, double vol = 0.02) {
  MarketPanel p = flat_panel(n_stocks, n_days);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (std::size_t s = 0; s < n_stocks; ++s) {
    double c = 100.0 * u(rng);
    for (std::size_t d = 0; d < n_days; ++d) {
      const double o = c * std::exp(0.25 * vol * z(rng));
      c = o * std::exp(vol * z(rng));
      p.open(s, d) = o;
      p.close(s, d) = c;
      p.volume(s, d) = std::round(1000.0 * u(rng));
      if (d % 7 == 0) {
        p.op_income_forecast(s, d) = 50.0 * u(rng);
        p.target_price_forecast(s, d) = 120.0 * u(rng);
      } else if (d > 0) {
        p.op_income_forecast(s, d) = p.op_income_forecast(s, d - 1);
        p.target_price_forecast(s, d) = p.target_price_forecast(s, d - 1);
      }
    }
  }
  return p;
}

}  // namespace xsect::test

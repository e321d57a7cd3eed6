#include "xsect/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "xsect/csv.hpp"
#include "xsect/error.hpp"

namespace xsect {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

using FieldPtr = double FundamentalRecord::*;

const std::vector<FieldPtr>& fundamental_fields() {
  static const std::vector<FieldPtr> fields = {
      &FundamentalRecord::net_assets,          &FundamentalRecord::net_profits,
      &FundamentalRecord::dividends,           &FundamentalRecord::sales,
      &FundamentalRecord::operating_cashflow,  &FundamentalRecord::total_assets,
      &FundamentalRecord::current_assets,      &FundamentalRecord::current_liabilities,
      &FundamentalRecord::debt,                &FundamentalRecord::net_operating_profit,
      &FundamentalRecord::nopat,               &FundamentalRecord::capex,
      &FundamentalRecord::tangible_fixed_payments, &FundamentalRecord::depreciation,
      &FundamentalRecord::delta_working_capital};
  return fields;
}

std::string key(const std::string& stock, const std::string& date) {
  return "(" + stock + ", " + date + ")";
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (!same(a(i, j), b(i, j))) return false;
  return true;
}

std::size_t day_on_calendar(const csv::Reader& r, const TradingCalendar& cal,
                            const std::string& date) {
  if (!is_iso_date(date)) throw ParseError(r.where() + ": bad date '" + date + "'");
  auto d = cal.find(date);
  if (!d) throw ValidationError(r.where() + ": date " + date + " is not on the trading calendar");
  return *d;
}

std::size_t known_stock(const csv::Reader& r, const MarketPanel& panel, const std::string& id) {
  auto s = panel.stock_index(id);
  if (!s) throw ValidationError(r.where() + ": unknown stock '" + id + "' (absent from prices)");
  return *s;
}

void write_number(std::ostream& out, double v) { out << csv::format_double(v); }

}  // namespace

const std::vector<std::string>& fundamental_field_names() {
  static const std::vector<std::string> names = {
      "net_assets",   "net_profits",         "dividends",  "sales",
      "operating_cashflow", "total_assets",  "current_assets", "current_liabilities",
      "debt",         "net_operating_profit", "nopat",     "capex",
      "tangible_fixed_payments", "depreciation", "delta_working_capital"};
  return names;
}

std::optional<std::size_t> MarketPanel::stock_index(std::string_view id) const {
  auto it = std::lower_bound(stocks.begin(), stocks.end(), id,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == stocks.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - stocks.begin());
}

std::optional<std::size_t> MarketPanel::fundamentals_asof(std::size_t stock, std::size_t day) const {
  const auto& vis = visible_from.at(stock);
  auto it = std::upper_bound(vis.begin(), vis.end(), day);
  if (it == vis.begin()) return std::nullopt;
  return static_cast<std::size_t>(it - vis.begin()) - 1;
}

void MarketPanel::reset(TradingCalendar cal, std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  calendar = std::move(cal);
  stocks = std::move(ids);
  const auto n = static_cast<Eigen::Index>(stocks.size());
  const auto t = static_cast<Eigen::Index>(calendar.size());
  open = Eigen::MatrixXd::Constant(n, t, kNaN);
  close = Eigen::MatrixXd::Constant(n, t, kNaN);
  volume = Eigen::MatrixXd::Constant(n, t, kNaN);
  shares_outstanding = Eigen::MatrixXd::Constant(n, t, kNaN);
  op_income_forecast = Eigen::MatrixXd::Constant(n, t, kNaN);
  target_price_forecast = Eigen::MatrixXd::Constant(n, t, kNaN);
  member = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, t, false);
  fundamentals.assign(stocks.size(), {});
  visible_from.assign(stocks.size(), {});
}

void MarketPanel::index_fundamentals(std::size_t lag_days) {
  visible_from.assign(stocks.size(), {});
  for (std::size_t s = 0; s < stocks.size(); ++s) {
    auto& recs = fundamentals[s];
    std::sort(recs.begin(), recs.end(),
              [](const FundamentalRecord& a, const FundamentalRecord& b) { return a.month_end < b.month_end; });
    for (const auto& rec : recs) {
      const std::size_t pos = calendar.lower_bound(rec.month_end) + lag_days;
      visible_from[s].push_back(pos < calendar.size() ? pos : kNever);
    }
  }
}

bool identical(const MarketPanel& a, const MarketPanel& b) {
  if (!(a.calendar == b.calendar) || a.stocks != b.stocks) return false;
  if (!same(a.open, b.open) || !same(a.close, b.close) || !same(a.volume, b.volume) ||
      !same(a.shares_outstanding, b.shares_outstanding) ||
      !same(a.op_income_forecast, b.op_income_forecast) ||
      !same(a.target_price_forecast, b.target_price_forecast))
    return false;
  if ((a.member != b.member).any()) return false;
  if (a.visible_from != b.visible_from || a.fundamentals.size() != b.fundamentals.size()) return false;
  for (std::size_t s = 0; s < a.fundamentals.size(); ++s) {
    const auto& ra = a.fundamentals[s];
    const auto& rb = b.fundamentals[s];
    if (ra.size() != rb.size()) return false;
    for (std::size_t k = 0; k < ra.size(); ++k) {
      if (ra[k].month_end != rb[k].month_end) return false;
      for (auto f : fundamental_fields())
        if (!same(ra[k].*f, rb[k].*f)) return false;
    }
  }
  return true;
}

PanelPaths PanelPaths::in_directory(const std::filesystem::path& dir) {
  PanelPaths p;
  p.prices = dir / "prices.csv";
  if (std::filesystem::exists(dir / "fundamentals.csv")) p.fundamentals = dir / "fundamentals.csv";
  if (std::filesystem::exists(dir / "forecasts.csv")) p.forecasts = dir / "forecasts.csv";
  if (std::filesystem::exists(dir / "membership.csv")) p.membership = dir / "membership.csv";
  return p;
}

TradingCalendar calendar_from_prices(const std::filesystem::path& prices) {
  csv::Reader r(prices);
  const auto c_date = r.column("date");
  std::set<std::string> dates;
  while (r.next()) {
    const auto& d = r.text(c_date);
    if (!is_iso_date(d)) throw ParseError(r.where() + ": bad date '" + d + "'");
    dates.insert(d);
  }
  if (dates.empty()) throw ValidationError(prices.string() + ": no rows");
  return TradingCalendar(std::vector<std::string>(dates.begin(), dates.end()));
}

MarketPanel load_panel(const PanelPaths& paths, const LoadOptions& options) {
  return load_panel(paths, calendar_from_prices(paths.prices), options);
}

MarketPanel load_panel(const PanelPaths& paths, const TradingCalendar& calendar,
                       const LoadOptions& options) {
  MarketPanel panel;

  // prices.csv: two passes so the stock set is known before allocation.
  {
    csv::Reader r(paths.prices);
    r.require_columns({"stock_id", "date", "open", "close", "volume", "shares_outstanding"});
    const auto c_id = r.column("stock_id");
    std::set<std::string> ids;
    while (r.next()) {
      if (r.text(c_id).empty()) throw ParseError(r.where() + ": empty stock_id");
      ids.insert(r.text(c_id));
    }
    if (ids.empty()) throw ValidationError(paths.prices.string() + ": no rows");
    panel.reset(calendar, std::vector<std::string>(ids.begin(), ids.end()));
  }
  {
    csv::Reader r(paths.prices);
    const auto c_id = r.column("stock_id"), c_date = r.column("date"), c_open = r.column("open"),
               c_close = r.column("close"), c_vol = r.column("volume"),
               c_sh = r.column("shares_outstanding");
    while (r.next()) {
      const auto& id = r.text(c_id);
      const auto& date = r.text(c_date);
      const std::size_t d = day_on_calendar(r, calendar, date);
      const std::size_t s = *panel.stock_index(id);
      if (!std::isnan(panel.close(s, d)))
        throw ValidationError(r.where() + ": duplicate price row " + key(id, date));
      const double close = r.number(c_close);
      const double open = r.optional_number(c_open);
      const double vol = r.number(c_vol);
      const double shares = r.optional_number(c_sh);
      if (close <= 0) throw ValidationError(r.where() + ": non-positive close at " + key(id, date));
      if (!std::isnan(open) && open <= 0)
        throw ValidationError(r.where() + ": non-positive open at " + key(id, date));
      if (vol < 0) throw ValidationError(r.where() + ": negative volume at " + key(id, date));
      if (!std::isnan(shares) && shares <= 0)
        throw ValidationError(r.where() + ": non-positive shares_outstanding at " + key(id, date));
      panel.open(s, d) = open;
      panel.close(s, d) = close;
      panel.volume(s, d) = vol;
      panel.shares_outstanding(s, d) = shares;
    }
  }

  if (!paths.fundamentals.empty()) {
    csv::Reader r(paths.fundamentals);
    const auto c_id = r.column("stock_id"), c_date = r.column("month_end_date");
    std::vector<std::size_t> cols;
    for (const auto& name : fundamental_field_names()) cols.push_back(r.column(name));
    std::set<std::pair<std::size_t, std::string>> seen;
    while (r.next()) {
      const std::size_t s = known_stock(r, panel, r.text(c_id));
      FundamentalRecord rec;
      rec.month_end = r.text(c_date);
      if (!is_iso_date(rec.month_end)) throw ParseError(r.where() + ": bad date '" + rec.month_end + "'");
      if (!seen.emplace(s, rec.month_end).second)
        throw ValidationError(r.where() + ": duplicate fundamentals row " + key(r.text(c_id), rec.month_end));
      for (std::size_t k = 0; k < cols.size(); ++k) rec.*fundamental_fields()[k] = r.optional_number(cols[k]);
      panel.fundamentals[s].push_back(std::move(rec));
    }
  }
  panel.index_fundamentals(options.fundamentals_lag_days);

  if (!paths.forecasts.empty()) {
    csv::Reader r(paths.forecasts);
    const auto c_id = r.column("stock_id"), c_date = r.column("date"),
               c_op = r.column("op_income_forecast"), c_tp = r.column("target_price_forecast");
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(panel.open.rows(), panel.open.cols(), false);
    while (r.next()) {
      const std::size_t s = known_stock(r, panel, r.text(c_id));
      const std::size_t d = day_on_calendar(r, calendar, r.text(c_date));
      if (seen(s, d)) throw ValidationError(r.where() + ": duplicate forecast row " + key(r.text(c_id), r.text(c_date)));
      seen(s, d) = true;
      panel.op_income_forecast(s, d) = r.optional_number(c_op);
      panel.target_price_forecast(s, d) = r.optional_number(c_tp);
    }
  }

  if (!paths.membership.empty()) {
    csv::Reader r(paths.membership);
    const auto c_id = r.column("stock_id"), c_date = r.column("date"), c_m = r.column("is_member");
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(panel.open.rows(), panel.open.cols(), false);
    while (r.next()) {
      const std::size_t s = known_stock(r, panel, r.text(c_id));
      const std::size_t d = day_on_calendar(r, calendar, r.text(c_date));
      if (seen(s, d)) throw ValidationError(r.where() + ": duplicate membership row " + key(r.text(c_id), r.text(c_date)));
      seen(s, d) = true;
      const auto& flag = r.text(c_m);
      if (flag != "0" && flag != "1") throw ParseError(r.where() + ": is_member must be 0 or 1, got '" + flag + "'");
      panel.member(s, d) = flag == "1";
    }
  } else {
    panel.member = panel.close.array().isFinite();
  }

  validate_panel(panel);
  return panel;
}

void validate_panel(const MarketPanel& panel) {
  for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
    std::ptrdiff_t first = -1, last = -1;
    for (std::size_t d = 0; d < panel.n_days(); ++d) {
      const double c = panel.close(s, d), o = panel.open(s, d), v = panel.volume(s, d);
      if ((!std::isnan(c) && !(c > 0)) || (!std::isnan(o) && !(o > 0)))
        throw ValidationError("non-positive price at " + key(panel.stocks[s], panel.calendar.date(d)));
      if (!std::isnan(v) && v < 0)
        throw ValidationError("negative volume at " + key(panel.stocks[s], panel.calendar.date(d)));
      if (panel.member(s, d)) {
        if (first < 0) first = static_cast<std::ptrdiff_t>(d);
        last = static_cast<std::ptrdiff_t>(d);
      }
    }
    for (std::ptrdiff_t d = first; d >= 0 && d <= last; ++d) {
      if (std::isnan(panel.close(s, d)) || std::isnan(panel.volume(s, d)))
        throw ValidationError("price gap inside membership span at " +
                              key(panel.stocks[s], panel.calendar.date(static_cast<std::size_t>(d))));
    }
  }
}

void write_panel(const MarketPanel& panel, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cal = panel.calendar;
  {
    std::ofstream out(dir / "prices.csv");
    out << "stock_id,date,open,close,volume,shares_outstanding\n";
    for (std::size_t s = 0; s < panel.n_stocks(); ++s)
      for (std::size_t d = 0; d < panel.n_days(); ++d) {
        if (std::isnan(panel.close(s, d))) continue;
        out << panel.stocks[s] << ',' << cal.date(d) << ',';
        write_number(out, panel.open(s, d));
        out << ',';
        write_number(out, panel.close(s, d));
        out << ',';
        write_number(out, panel.volume(s, d));
        out << ',';
        write_number(out, panel.shares_outstanding(s, d));
        out << '\n';
      }
  }
  {
    std::ofstream out(dir / "fundamentals.csv");
    out << "stock_id,month_end_date";
    for (const auto& n : fundamental_field_names()) out << ',' << n;
    out << '\n';
    for (std::size_t s = 0; s < panel.n_stocks(); ++s)
      for (const auto& rec : panel.fundamentals[s]) {
        out << panel.stocks[s] << ',' << rec.month_end;
        for (auto f : fundamental_fields()) {
          out << ',';
          write_number(out, rec.*f);
        }
        out << '\n';
      }
  }
  {
    std::ofstream out(dir / "forecasts.csv");
    out << "stock_id,date,op_income_forecast,target_price_forecast\n";
    for (std::size_t s = 0; s < panel.n_stocks(); ++s)
      for (std::size_t d = 0; d < panel.n_days(); ++d) {
        const double a = panel.op_income_forecast(s, d), b = panel.target_price_forecast(s, d);
        if (std::isnan(a) && std::isnan(b)) continue;
        out << panel.stocks[s] << ',' << cal.date(d) << ',';
        write_number(out, a);
        out << ',';
        write_number(out, b);
        out << '\n';
      }
  }
  {
    std::ofstream out(dir / "membership.csv");
    out << "stock_id,date,is_member\n";
    for (std::size_t s = 0; s < panel.n_stocks(); ++s)
      for (std::size_t d = 0; d < panel.n_days(); ++d) {
        if (!panel.member(s, d) && std::isnan(panel.close(s, d))) continue;
        out << panel.stocks[s] << ',' << cal.date(d) << ',' << (panel.member(s, d) ? 1 : 0) << '\n';
      }
  }
}

bool in_universe(const MarketPanel& panel, std::size_t stock, std::size_t day) {
  if (!panel.member(stock, day) || day < kFactorHistory) return false;
  for (std::size_t d = day - kFactorHistory; d <= day; ++d)
    if (std::isnan(panel.close(stock, d)) || std::isnan(panel.volume(stock, d))) return false;
  return true;
}

Universe universe_at(const MarketPanel& panel, std::size_t day) {
  if (day >= panel.n_days()) throw ValidationError("day index " + std::to_string(day) + " is off the calendar");
  Universe u;
  u.day = day;
  for (std::size_t s = 0; s < panel.n_stocks(); ++s)
    if (in_universe(panel, s, day)) u.stocks.push_back(s);
  return u;
}

Universe universe_at(const MarketPanel& panel, std::string_view date) {
  return universe_at(panel, panel.calendar.index_of(date));
}

}  // namespace xsect

#include "xsect/factors.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "xsect/csv.hpp"
#include "xsect/error.hpp"

namespace xsect {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(double num, double den) {
  if (!std::isfinite(num) || !std::isfinite(den) || den == 0.0) return kNaN;
  return num / den;
}

double change_rate(double now, double before) { return ratio(now, before) - 1.0; }

}  // namespace

Eigen::Matrix<double, 8, 1> price_momentum_factors(const MarketPanel& panel, std::size_t stock, std::size_t day) {
  Eigen::Matrix<double, 8, 1> out;
  const double now = panel.close(stock, day);
  for (std::size_t k = 0; k < kReturnHorizons.size(); ++k) {
    const auto h = static_cast<std::size_t>(kReturnHorizons[k]);
    out(k) = day >= h ? change_rate(now, panel.close(stock, day - h)) : kNaN;
  }
  return out;
}

Eigen::Matrix<double, 4, 1> liquidity_factors(const MarketPanel& panel, std::size_t stock, std::size_t day) {
  Eigen::Matrix<double, 4, 1> out = Eigen::Matrix<double, 4, 1>::Constant(kNaN);
  constexpr std::size_t kLong = 60;
  if (day + 1 < kLong) return out;
  // traded value, oldest first
  Eigen::Matrix<double, kLong, 1> value;
  for (std::size_t i = 0; i < kLong; ++i) {
    const std::size_t d = day + 1 - kLong + i;
    value(i) = panel.close(stock, d) * panel.volume(stock, d);
  }
  if (!value.allFinite()) return out;
  const double mean60 = value.mean();
  out(0) = mean60;
  if (mean60 == 0.0) return out;
  for (std::size_t k = 0; k < kLiquidityWindows.size(); ++k) {
    const auto w = kLiquidityWindows[k];
    out(k + 1) = value.tail(w).mean() / mean60;
  }
  return out;
}

Eigen::Matrix<double, 6, 1> forecast_revision_factors(const MarketPanel& panel, std::size_t stock, std::size_t day) {
  Eigen::Matrix<double, 6, 1> out = Eigen::Matrix<double, 6, 1>::Constant(kNaN);
  const Eigen::MatrixXd* series[2] = {&panel.op_income_forecast, &panel.target_price_forecast};
  for (int f = 0; f < 2; ++f) {
    const double now = (*series[f])(stock, day);
    for (std::size_t k = 0; k < kRevisionHorizons.size(); ++k) {
      const auto h = static_cast<std::size_t>(kRevisionHorizons[k]);
      if (day < h) continue;
      const double before = (*series[f])(stock, day - h);
      if (!std::isfinite(now) || !std::isfinite(before) || before <= 0.0) continue;
      out(3 * f + k) = now / before - 1.0;
    }
  }
  return out;
}

Eigen::Matrix<double, 15, 1> fundamental_factors(const MarketPanel& panel, std::size_t stock, std::size_t day) {
  Eigen::Matrix<double, 15, 1> out = Eigen::Matrix<double, 15, 1>::Constant(kNaN);
  // Everything is evaluated at the latest month-end so values stay constant
  // until the next one.
  const auto month_end = panel.calendar.month_end_at_or_before(day);
  if (!month_end) return out;
  const auto idx = panel.fundamentals_asof(stock, *month_end);
  if (!idx) return out;
  const auto& r = panel.fundamentals[stock][*idx];
  const FundamentalRecord* prev = *idx > 0 ? &panel.fundamentals[stock][*idx - 1] : nullptr;

  double mv = panel.close(stock, *month_end) * panel.shares_outstanding(stock, *month_end);
  if (!(mv > 0.0)) mv = kNaN;

  out(0) = ratio(r.net_assets, mv);
  out(1) = ratio(r.net_profits, mv);
  out(2) = ratio(r.dividends, mv);
  out(3) = ratio(r.sales, mv);
  out(4) = ratio(r.operating_cashflow, mv);
  out(5) = ratio(r.net_profits, r.net_assets);
  out(6) = ratio(r.net_operating_profit, r.total_assets);
  out(7) = ratio(r.nopat, r.debt + r.net_assets);
  out(8) = ratio(-(r.delta_working_capital - r.depreciation), r.total_assets);
  out(9) = ratio(r.sales, r.total_assets);
  out(10) = ratio(r.current_assets, r.current_liabilities);
  out(11) = ratio(r.net_assets, r.total_assets);
  if (prev != nullptr) {
    out(12) = change_rate(r.total_assets, prev->total_assets);
    out(13) = change_rate(r.capex, prev->capex);
    out(14) = ratio(r.tangible_fixed_payments - prev->tangible_fixed_payments, r.total_assets);
  }
  return out;
}

FactorRow stock_factors(const MarketPanel& panel, std::size_t stock, std::size_t day) {
  FactorRow row;
  row << price_momentum_factors(panel, stock, day), liquidity_factors(panel, stock, day),
      forecast_revision_factors(panel, stock, day), fundamental_factors(panel, stock, day);
  return row;
}

double factor_value(const MarketPanel& panel, std::size_t stock, std::size_t day, int factor_no) {
  if (factor_no < 1 || factor_no > kNumFactors)
    throw std::out_of_range("factor number must be in 1..33, got " + std::to_string(factor_no));
  if (factor_no <= 8) return price_momentum_factors(panel, stock, day)(factor_no - 1);
  if (factor_no <= 12) return liquidity_factors(panel, stock, day)(factor_no - 9);
  if (factor_no <= 18) return forecast_revision_factors(panel, stock, day)(factor_no - 13);
  return fundamental_factors(panel, stock, day)(factor_no - 19);
}

FactorMatrix build_factor_matrix(const MarketPanel& panel, const Universe& universe, int max_missing) {
  FactorMatrix fm;
  fm.day = universe.day;
  std::vector<FactorRow> rows;
  rows.reserve(universe.size());
  for (std::size_t s : universe.stocks) {
    FactorRow row = stock_factors(panel, s, universe.day);
    const int missing = static_cast<int>((!row.array().isFinite()).count());
    if (missing > max_missing) {
      fm.excluded.push_back({s, missing});
      continue;
    }
    fm.stocks.push_back(s);
    rows.push_back(row);
  }
  if (rows.empty())
    throw ValidationError("empty universe on " + panel.calendar.date(universe.day) + " after exclusions");
  fm.values.resize(static_cast<Eigen::Index>(rows.size()), kNumFactors);
  for (std::size_t i = 0; i < rows.size(); ++i) fm.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return fm;
}

void write_factors_csv(const std::filesystem::path& path, const MarketPanel& panel,
                       std::span<const FactorMatrix> matrices) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "stock_id,date";
  for (int k = 1; k <= kNumFactors; ++k) out << ",f" << k;
  out << '\n';
  for (const auto& fm : matrices) {
    for (std::size_t i = 0; i < fm.stocks.size(); ++i) {
      out << panel.stocks[fm.stocks[i]] << ',' << panel.calendar.date(fm.day);
      for (int k = 0; k < kNumFactors; ++k)
        out << ',' << csv::format_double(fm.values(static_cast<Eigen::Index>(i), k));
      out << '\n';
    }
  }
}

}  // namespace xsect

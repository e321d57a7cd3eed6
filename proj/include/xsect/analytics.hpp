#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xsect/backtest.hpp"

namespace xsect {

inline constexpr double kTradingDaysPerYear = 250.0;

struct AnnualStats {
  double ret = 0.0;             // compounded, annualized
  std::optional<double> risk;   // annualized sample deviation; needs T >= 2
  std::optional<double> ratio;  // ret / risk; undefined when risk is 0
};

// Annualized compounded return, volatility and their ratio for a daily
// series. Shared by (Alpha, TE, IR) on excess returns and (AR, RISK, R/R)
// on long-short returns.
template <typename Derived>
AnnualStats annualized_stats(const Eigen::MatrixBase<Derived>& x) {
  AnnualStats s;
  const auto T = x.size();
  if (T == 0) return s;
  double log_growth = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) log_growth += std::log1p(static_cast<double>(x(t)));
  s.ret = std::expm1(kTradingDaysPerYear / static_cast<double>(T) * log_growth);
  if (T < 2) return s;
  const double mu = x.mean();
  const double ss = (x.array() - mu).square().sum();
  s.risk = std::sqrt(kTradingDaysPerYear / static_cast<double>(T - 1) * ss);
  if (*s.risk > 0.0) s.ratio = s.ret / *s.risk;
  return s;
}

// Largest peak-to-trough drop of the compounded wealth path, in [-1, 0].
template <typename Derived>
double max_drawdown(const Eigen::MatrixBase<Derived>& r) {
  double wealth = 1.0, peak = 1.0, worst = 0.0;
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    wealth *= 1.0 + static_cast<double>(r(t));
    peak = std::max(peak, wealth);
    worst = std::min(worst, wealth / peak - 1.0);
  }
  return worst;
}

template <typename Derived>
Eigen::VectorXd cumulative_series(const Eigen::MatrixBase<Derived>& r) {
  Eigen::VectorXd out(r.size());
  double wealth = 1.0;
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    wealth *= 1.0 + static_cast<double>(r(t));
    out(t) = wealth - 1.0;
  }
  return out;
}

// Long return minus the equal-weight universe return, day by day.
Eigen::VectorXd excess_series(const Eigen::VectorXd& long_returns, const Eigen::VectorXd& benchmark);
Eigen::VectorXd excess_series(const BacktestResult& result);

// w_i (1 + r_i) / sum_j w_j (1 + r_j)
Eigen::VectorXd drift_weights(const Eigen::VectorXd& weights, const Eigen::VectorXd& returns);

// Half the L1 distance between two weight maps; names missing on one side
// count with weight 0.
double one_way_turnover(const Weights& before, const Weights& after);

struct TurnoverSummary {
  std::optional<double> long_side;
  std::optional<double> short_side;
  std::optional<double> long_short() const {
    if (!long_side || !short_side) return std::nullopt;
    return *long_side + *short_side;
  }
};

// Per tranche, the mean one-way turnover over its rebalances (first entries
// have nothing to turn over and are skipped); then the mean over tranches.
TurnoverSummary turnover(std::span<const RebalanceRecord> rebalances);

struct MetricsReport {
  std::string model;
  std::size_t T = 0;
  double alpha = 0.0;
  std::optional<double> te, ir;
  double ar = 0.0;
  std::optional<double> risk, rr;
  double maxdd_long = 0.0;
  double maxdd_longshort = 0.0;
  std::optional<double> tn_long, tn_short, tn_longshort;
};

// Metrics on the aggregate series. The first ramp_in_days (fewer than five
// tranches live) are dropped unless include_ramp_in is set.
MetricsReport compute_metrics(const BacktestResult& result, bool include_ramp_in = false);

// Two blocks: Model,Alpha,TE,IR,MaxDD,TN for the long portfolio, then a
// blank line and Model,AR,RISK,R/R,MaxDD,TN for long-short. Undefined
// values are written as NA.
void write_report_csv(const std::filesystem::path& path, std::span<const MetricsReport> rows);
void write_report_long_csv(const std::filesystem::path& path, std::span<const MetricsReport> rows);
void write_report_longshort_csv(const std::filesystem::path& path, std::span<const MetricsReport> rows);

// date,value with the compounded path of a daily series.
void write_cumulative_csv(const std::filesystem::path& path, const std::vector<std::string>& dates,
                          const Eigen::VectorXd& returns);

}  // namespace xsect

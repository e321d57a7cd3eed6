#include "xsect/synthgen.hpp"

#include <array>
#include <cmath>
#include <random>

#include "xsect/error.hpp"
#include "xsect/factors.hpp"
#include "xsect/csv.hpp"
#include "xsect/log.hpp"
#include "xsect/preprocess.hpp"
#include "xsect/random.hpp"

namespace xsect {
namespace {

constexpr double kGapShare = 0.25;    // overnight vol as a fraction of daily_vol

// (signal_strength, per-day loading / daily_vol) pairs measured by
// tools/synth_calibrate on 200 stocks x 1000 days with factor No.1.
constexpr std::array<std::array<double, 2>, 11> kCalibration{{{0.00, 0.0},
                                                              {0.05, 0.02205},
                                                              {0.10, 0.04310},
                                                              {0.15, 0.06260},
                                                              {0.20, 0.08079},
                                                              {0.25, 0.09794},
                                                              {0.30, 0.11436},
                                                              {0.40, 0.14587},
                                                              {0.50, 0.17778},
                                                              {0.60, 0.21359},
                                                              {0.70, 0.25977}}};

enum Stream : std::uint64_t { kLevels = 1, kVolume, kShares, kForecasts, kFundamentals, kPrices };

std::string stock_id(std::size_t i, std::size_t n) {
  const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
  std::string digits = std::to_string(i + 1);
  return "S" + std::string(static_cast<std::size_t>(width) - std::min(digits.size(), static_cast<std::size_t>(width)), '0') + digits;
}

// Cross-sectional z-score of the signal factor at `day`; missing values
// and degenerate days give 0.
Eigen::VectorXd signal_z(const MarketPanel& panel, std::size_t day, int factor) {
  const auto n = static_cast<Eigen::Index>(panel.n_stocks());
  Eigen::VectorXd v(n);
  for (Eigen::Index s = 0; s < n; ++s) v(s) = factor_value(panel, static_cast<std::size_t>(s), day, factor);
  double sum = 0.0, sq = 0.0;
  int k = 0;
  for (Eigen::Index s = 0; s < n; ++s)
    if (std::isfinite(v(s))) {
      sum += v(s);
      ++k;
    }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (k < 2) return z;
  const double mu = sum / k;
  for (Eigen::Index s = 0; s < n; ++s)
    if (std::isfinite(v(s))) sq += (v(s) - mu) * (v(s) - mu);
  const double sd = std::sqrt(sq / (k - 1));
  if (!(sd > 0.0)) return z;
  for (Eigen::Index s = 0; s < n; ++s)
    if (std::isfinite(v(s))) z(s) = (v(s) - mu) / sd;
  return z;
}

FundamentalRecord evolve(const FundamentalRecord& prev, Rng& rng) {
  std::normal_distribution<double> g(0.0, 0.05);
  FundamentalRecord r = prev;
  auto step = [&](double x) { return x * std::exp(g(rng)); };
  r.total_assets = step(prev.total_assets);
  r.net_assets = step(prev.net_assets);
  r.sales = step(prev.sales);
  r.net_profits = prev.net_profits + 0.01 * r.total_assets * g(rng) * 4.0;
  r.dividends = std::max(0.0, step(prev.dividends));
  r.operating_cashflow = prev.operating_cashflow + 0.01 * r.total_assets * g(rng) * 4.0;
  r.current_assets = step(prev.current_assets);
  r.current_liabilities = step(prev.current_liabilities);
  r.debt = step(prev.debt);
  r.net_operating_profit = prev.net_operating_profit + 0.01 * r.total_assets * g(rng) * 4.0;
  r.nopat = 0.7 * r.net_operating_profit;
  r.capex = step(prev.capex);
  r.tangible_fixed_payments = step(prev.tangible_fixed_payments);
  r.depreciation = step(prev.depreciation);
  r.delta_working_capital = 0.02 * r.total_assets * g(rng) * 10.0;
  return r;
}

FundamentalRecord initial_record(double scale, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FundamentalRecord r;
  r.total_assets = scale * (0.5 + u(rng));
  r.net_assets = r.total_assets * (0.2 + 0.5 * u(rng));
  r.sales = r.total_assets * (0.3 + 1.2 * u(rng));
  r.net_profits = r.net_assets * (-0.02 + 0.15 * u(rng));
  r.dividends = std::max(0.0, r.net_profits) * 0.3 * u(rng);
  r.operating_cashflow = r.sales * (0.02 + 0.1 * u(rng));
  r.current_assets = r.total_assets * (0.2 + 0.3 * u(rng));
  r.current_liabilities = r.total_assets * (0.1 + 0.3 * u(rng));
  r.debt = r.total_assets * (0.05 + 0.4 * u(rng));
  r.net_operating_profit = r.sales * (0.01 + 0.12 * u(rng));
  r.nopat = 0.7 * r.net_operating_profit;
  r.capex = r.total_assets * (0.01 + 0.05 * u(rng));
  r.tangible_fixed_payments = r.total_assets * (0.01 + 0.04 * u(rng));
  r.depreciation = r.total_assets * (0.01 + 0.03 * u(rng));
  r.delta_working_capital = r.total_assets * 0.02 * (u(rng) - 0.5);
  return r;
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.n_stocks < 10) throw ConfigError("synth: n_stocks must be at least 10");
  if (spec.n_days < 2) throw ConfigError("synth: n_days must be at least 2");
  if (!(spec.daily_vol > 0.0) || !std::isfinite(spec.daily_vol)) throw ConfigError("synth: daily_vol must be > 0");
  if (!(spec.signal_strength >= -1.0 && spec.signal_strength <= 1.0))
    throw ConfigError("synth: signal_strength must lie in [-1, 1]");
  if (spec.signal_factor < 1 || spec.signal_factor > kNumFactors)
    throw ConfigError("synth: signal_factor must be a factor number 1..33");
  if (spec.fundamental_cadence < 1) throw ConfigError("synth: fundamental_cadence must be >= 1 month");
  if (!is_iso_date(spec.start)) throw ConfigError("synth: start must be an ISO date, got '" + spec.start + "'");
}

double planted_loading(const SynthSpec& spec) {
  if (spec.loading) return *spec.loading * spec.daily_vol;
  const double s = std::abs(spec.signal_strength);
  const auto& table = kCalibration;
  double unit = table.back()[1];
  if (s > table.back()[0]) {
    log(LogLevel::warn, "synth: signal_strength beyond the calibrated range, capped at " +
                            csv::format_double(table.back()[0]));
  } else {
    for (std::size_t i = 1; i < table.size(); ++i)
      if (s <= table[i][0]) {
        const double w = (s - table[i - 1][0]) / (table[i][0] - table[i - 1][0]);
        unit = table[i - 1][1] + w * (table[i][1] - table[i - 1][1]);
        break;
      }
  }
  return std::copysign(unit, spec.signal_strength) * spec.daily_vol;
}

double mean_rank_ic(const MarketPanel& panel, int factor_no) {
  double sum = 0.0;
  int days = 0;
  std::vector<double> f, y;
  for (std::size_t t = 0; t + kTargetHorizon < panel.n_days(); ++t) {
    f.clear();
    y.clear();
    for (std::size_t s = 0; s < panel.n_stocks(); ++s) {
      const double a = factor_value(panel, s, t, factor_no), b = target_return(panel, s, t);
      if (std::isfinite(a) && std::isfinite(b)) {
        f.push_back(a);
        y.push_back(b);
      }
    }
    if (f.size() < 3) continue;
    const auto n = static_cast<Eigen::Index>(f.size());
    const Eigen::VectorXd rf = rank_scale(Eigen::Map<const Eigen::VectorXd>(f.data(), n));
    const Eigen::VectorXd ry = rank_scale(Eigen::Map<const Eigen::VectorXd>(y.data(), n));
    const Eigen::VectorXd cf = rf.array() - rf.mean(), cy = ry.array() - ry.mean();
    const double den = std::sqrt(cf.squaredNorm() * cy.squaredNorm());
    if (!(den > 0.0)) continue;
    sum += cf.dot(cy) / den;
    ++days;
  }
  return days == 0 ? 0.0 : sum / days;
}

MarketPanel generate_panel(const SynthSpec& spec) {
  validate(spec);
  const std::size_t n = spec.n_stocks, T = spec.n_days;
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = stock_id(i, n);

  MarketPanel p;
  p.reset(TradingCalendar(weekdays_from(spec.start, T)), ids);
  p.member.setConstant(true);

  Rng levels(derive_seed(spec.seed, kLevels));
  std::normal_distribution<double> z01(0.0, 1.0);
  std::vector<double> p0(n), scale(n), liquidity(n);
  for (std::size_t s = 0; s < n; ++s) {
    p0[s] = 1000.0 * std::exp(0.5 * z01(levels));
    liquidity[s] = 1e5 * std::exp(0.7 * z01(levels));
    scale[s] = 1e9 * std::exp(0.8 * z01(levels));
  }

  Rng vol_rng(derive_seed(spec.seed, kVolume));
  std::normal_distribution<double> vol_noise(0.0, 0.4);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t d = 0; d < T; ++d) p.volume(s, d) = std::round(liquidity[s] * std::exp(vol_noise(vol_rng)));

  Rng share_rng(derive_seed(spec.seed, kShares));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    double shares = std::round(scale[s] / p0[s] * (0.5 + u01(share_rng)));
    for (std::size_t d = 0; d < T; ++d) {
      if (u01(share_rng) < 0.002) shares = std::round(shares * (1.0 + 0.05 * u01(share_rng)));
      p.shares_outstanding(s, d) = shares;
    }
  }

  // Analyst forecasts: piecewise constant with occasional revisions.
  Rng fc_rng(derive_seed(spec.seed, kForecasts));
  std::normal_distribution<double> revision(0.0, 0.05);
  for (std::size_t s = 0; s < n; ++s) {
    double op = scale[s] * (0.02 + 0.08 * u01(fc_rng));
    double tp = p0[s] * (1.0 + 0.2 * u01(fc_rng));
    for (std::size_t d = 0; d < T; ++d) {
      if (u01(fc_rng) < 0.05) op *= std::exp(revision(fc_rng));
      if (u01(fc_rng) < 0.05) tp *= std::exp(revision(fc_rng));
      p.op_income_forecast(s, d) = op;
      p.target_price_forecast(s, d) = tp;
    }
  }

  // Fundamentals at every cadence-th month-end, starting with the first.
  Rng fund_rng(derive_seed(spec.seed, kFundamentals));
  std::vector<std::size_t> report_days;
  for (std::size_t d = 0, months = 0; d < T; ++d)
    if (p.calendar.is_month_end(d)) {
      if (months % static_cast<std::size_t>(spec.fundamental_cadence) == 0) report_days.push_back(d);
      ++months;
    }
  for (std::size_t s = 0; s < n; ++s) {
    FundamentalRecord rec = initial_record(scale[s], fund_rng);
    for (std::size_t k = 0; k < report_days.size(); ++k) {
      if (k > 0) rec = evolve(rec, fund_rng);
      rec.month_end = p.calendar.date(report_days[k]);
      p.fundamentals[s].push_back(rec);
    }
  }
  p.index_fundamentals(0);

  // Prices, day by day, so the planted drift only ever sees closed days.
  Rng px_rng(derive_seed(spec.seed, kPrices));
  const double sigma = spec.daily_vol, gap = kGapShare * sigma;
  const double b = planted_loading(spec);
  const auto ns = static_cast<Eigen::Index>(n);
  std::vector<Eigen::VectorXd> z_hist;
  for (std::size_t d = 0; d < T; ++d) {
    Eigen::VectorXd drift = Eigen::VectorXd::Zero(ns);
    if (b != 0.0)
      for (std::size_t j = 1; j <= 5 && j <= d; ++j) drift += z_hist[d - j];
    drift *= b;
    for (Eigen::Index s = 0; s < ns; ++s) {
      const auto si = static_cast<std::size_t>(s);
      const double prev = d == 0 ? p0[si] : p.close(s, static_cast<Eigen::Index>(d - 1));
      const double o = prev * std::exp(gap * z01(px_rng) - 0.5 * gap * gap);
      const double c = o * std::exp(sigma * z01(px_rng) - 0.5 * sigma * sigma + drift(s));
      p.open(s, static_cast<Eigen::Index>(d)) = o;
      p.close(s, static_cast<Eigen::Index>(d)) = c;
    }
    if (b != 0.0) z_hist.push_back(signal_z(p, d, spec.signal_factor));
  }
  validate_panel(p);
  return p;
}

void generate(const SynthSpec& spec, const std::filesystem::path& dir) { write_panel(generate_panel(spec), dir); }

}  // namespace xsect

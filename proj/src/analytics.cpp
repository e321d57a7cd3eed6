#include "xsect/analytics.hpp"

#include <fstream>
#include <map>

#include "xsect/csv.hpp"
#include "xsect/error.hpp"

namespace xsect {
namespace {

std::string cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string("NA"); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void long_block(std::ostream& out, std::span<const MetricsReport> rows) {
  out << "Model,Alpha,TE,IR,MaxDD,TN\n";
  for (const auto& m : rows)
    out << m.model << ',' << csv::format_double(m.alpha) << ',' << cell(m.te) << ',' << cell(m.ir) << ','
        << csv::format_double(m.maxdd_long) << ',' << cell(m.tn_long) << '\n';
}

void longshort_block(std::ostream& out, std::span<const MetricsReport> rows) {
  out << "Model,AR,RISK,R/R,MaxDD,TN\n";
  for (const auto& m : rows)
    out << m.model << ',' << csv::format_double(m.ar) << ',' << cell(m.risk) << ',' << cell(m.rr) << ','
        << csv::format_double(m.maxdd_longshort) << ',' << cell(m.tn_longshort) << '\n';
}

}  // namespace

Eigen::VectorXd excess_series(const Eigen::VectorXd& long_returns, const Eigen::VectorXd& benchmark) {
  if (long_returns.size() != benchmark.size())
    throw ValidationError("excess series: long has " + std::to_string(long_returns.size()) + " days, benchmark " +
                          std::to_string(benchmark.size()));
  return long_returns - benchmark;
}

Eigen::VectorXd excess_series(const BacktestResult& result) {
  return excess_series(result.long_returns, result.benchmark_returns);
}

Eigen::VectorXd drift_weights(const Eigen::VectorXd& weights, const Eigen::VectorXd& returns) {
  if (weights.size() != returns.size()) throw ValidationError("drift_weights: size mismatch");
  const Eigen::VectorXd grown = weights.cwiseProduct((returns.array() + 1.0).matrix());
  return grown / grown.sum();
}

double one_way_turnover(const Weights& before, const Weights& after) {
  std::map<std::string_view, double> diff;
  for (const auto& [id, w] : before) diff[id] += w;
  for (const auto& [id, w] : after) diff[id] -= w;
  double l1 = 0.0;
  for (const auto& [id, d] : diff) l1 += std::abs(d);
  return 0.5 * l1;
}

TurnoverSummary turnover(std::span<const RebalanceRecord> rebalances) {
  struct Acc {
    double sum = 0.0;
    int n = 0;
  };
  std::map<int, Acc> by_tranche[2];
  for (const auto& r : rebalances) {
    if (r.pre.empty()) continue;
    auto& acc = by_tranche[r.side == Side::long_side ? 0 : 1][r.tranche];
    acc.sum += one_way_turnover(r.pre, r.post);
    ++acc.n;
  }
  auto average = [](const std::map<int, Acc>& m) -> std::optional<double> {
    if (m.empty()) return std::nullopt;
    double total = 0.0;
    for (const auto& [t, a] : m) total += a.sum / a.n;
    return total / static_cast<double>(m.size());
  };
  return TurnoverSummary{average(by_tranche[0]), average(by_tranche[1])};
}

MetricsReport compute_metrics(const BacktestResult& result, bool include_ramp_in) {
  const Eigen::Index skip = include_ramp_in ? 0 : static_cast<Eigen::Index>(result.ramp_in_days);
  const Eigen::Index T = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(result.size()) - skip);
  const Eigen::VectorXd alpha = excess_series(result).tail(T);
  const Eigen::VectorXd ls = result.long_short_returns.tail(T);

  MetricsReport m;
  m.model = result.model;
  m.T = static_cast<std::size_t>(T);
  const AnnualStats a = annualized_stats(alpha);
  m.alpha = a.ret;
  m.te = a.risk;
  m.ir = a.ratio;
  const AnnualStats b = annualized_stats(ls);
  m.ar = b.ret;
  m.risk = b.risk;
  m.rr = b.ratio;
  m.maxdd_long = max_drawdown(alpha);
  m.maxdd_longshort = max_drawdown(ls);
  const TurnoverSummary tn = turnover(result.rebalances);
  m.tn_long = tn.long_side;
  m.tn_short = tn.short_side;
  m.tn_longshort = tn.long_short();
  return m;
}

void write_report_csv(const std::filesystem::path& path, std::span<const MetricsReport> rows) {
  auto out = open_out(path);
  long_block(out, rows);
  out << '\n';
  longshort_block(out, rows);
}

void write_report_long_csv(const std::filesystem::path& path, std::span<const MetricsReport> rows) {
  auto out = open_out(path);
  long_block(out, rows);
}

void write_report_longshort_csv(const std::filesystem::path& path, std::span<const MetricsReport> rows) {
  auto out = open_out(path);
  longshort_block(out, rows);
}

void write_cumulative_csv(const std::filesystem::path& path, const std::vector<std::string>& dates,
                          const Eigen::VectorXd& returns) {
  if (static_cast<Eigen::Index>(dates.size()) != returns.size()) throw ValidationError("cumulative: size mismatch");
  const Eigen::VectorXd path_values = cumulative_series(returns);
  auto out = open_out(path);
  out << "date,value\n";
  for (std::size_t i = 0; i < dates.size(); ++i)
    out << dates[i] << ',' << csv::format_double(path_values(static_cast<Eigen::Index>(i))) << '\n';
}

}  // namespace xsect

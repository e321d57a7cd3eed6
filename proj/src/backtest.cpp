#include "xsect/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <tuple>

#include "xsect/analytics.hpp"
#include "xsect/csv.hpp"
#include "xsect/error.hpp"
#include "xsect/log.hpp"
#include "xsect/parallel.hpp"

namespace xsect {
namespace {

constexpr double kWeightTolerance = 1e-12;

Leg enter(const std::vector<std::size_t>& names, const MarketPanel& panel, std::size_t day, std::string_view what) {
  Leg leg;
  for (std::size_t s : names) {
    if (std::isfinite(panel.open(s, day))) {
      leg.stocks.push_back(s);
    } else {
      log(LogLevel::info, "skipping " + panel.stocks[s] + " at " + panel.calendar.date(day) + " (" +
                              std::string(what) + "): no open price");
    }
  }
  if (leg.stocks.empty()) {
    leg.cash = 1.0;
    leg.weights.resize(0);
  } else {
    leg.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(leg.stocks.size()), 1.0 / static_cast<double>(leg.stocks.size()));
  }
  return leg;
}

// Marks a leg to `day`'s close and lets weights drift. Entry-day legs grow
// from the open, otherwise from the previous close. A stock without a
// close is exited at its last close and its value is held as cash.
double mark(Leg& leg, const MarketPanel& panel, std::size_t day, bool entry_day) {
  const auto n = static_cast<Eigen::Index>(leg.stocks.size());
  Eigen::VectorXd growth(n);
  std::vector<bool> gone(leg.stocks.size(), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t s = leg.stocks[static_cast<std::size_t>(i)];
    const double base = entry_day ? panel.open(s, day) : panel.close(s, day - 1);
    const double now = panel.close(s, day);
    if (std::isfinite(base) && std::isfinite(now)) {
      growth(i) = now / base;
    } else {
      growth(i) = 1.0;
      gone[static_cast<std::size_t>(i)] = true;
    }
  }
  const double ret = leg.weights.dot(growth.array().matrix() - Eigen::VectorXd::Ones(n));
  const double value = leg.weights.dot(growth) + leg.cash;
  leg.weights = leg.weights.cwiseProduct(growth) / value;
  leg.cash /= value;
  if (std::find(gone.begin(), gone.end(), true) != gone.end()) {
    Leg kept;
    kept.cash = leg.cash;
    std::vector<double> w;
    for (std::size_t i = 0; i < leg.stocks.size(); ++i) {
      if (gone[i]) {
        kept.cash += leg.weights(static_cast<Eigen::Index>(i));
        log(LogLevel::info, panel.stocks[leg.stocks[i]] + " exited at last close before " + panel.calendar.date(day));
      } else {
        kept.stocks.push_back(leg.stocks[i]);
        w.push_back(leg.weights(static_cast<Eigen::Index>(i)));
      }
    }
    kept.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    leg = std::move(kept);
  }
  return ret;
}

Weights weights_of(const Leg& leg, const MarketPanel& panel) {
  Weights out;
  if (leg.cash != 0.0) out.emplace_back(std::string(kCashId), leg.cash);
  for (std::size_t i = 0; i < leg.stocks.size(); ++i)
    out.emplace_back(panel.stocks[leg.stocks[i]], leg.weights(static_cast<Eigen::Index>(i)));
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string_view to_string(Side side) { return side == Side::long_side ? "long" : "short"; }

ScoreVector score_universe(const Predictor& predictor, const FeatureStore& store, std::size_t day) {
  const DaySlice* slice = store.slice(day);
  if (slice == nullptr)
    throw ValidationError("no tradable universe on " + store.panel().calendar.date(day));
  return ScoreVector{day, slice->stocks, predictor.predict(slice->features)};
}

ScoreVector score_universe(const Predictor& predictor, const MarketPanel& panel, std::size_t day,
                           const FeatureOptions& options) {
  const auto slice = make_slice(panel, day, options);
  if (!slice) throw ValidationError("no tradable universe on " + panel.calendar.date(day));
  return ScoreVector{day, slice->stocks, predictor.predict(slice->features)};
}

Quintiles form_quintiles(const ScoreVector& scores, std::size_t size_override) {
  const std::size_t n = scores.stocks.size();
  if (size_override == 0 && n < 5) throw ValidationError("quintiles need at least 5 stocks, got " + std::to_string(n));
  const std::size_t q = size_override > 0 ? std::min(size_override, n) : n / 5;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores.scores(static_cast<Eigen::Index>(a)), sb = scores.scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return scores.stocks[a] < scores.stocks[b];
  });
  Quintiles out;
  for (std::size_t i = 0; i < q; ++i) out.long_set.push_back(scores.stocks[order[i]]);
  for (std::size_t i = n - q; i < n; ++i) out.short_set.push_back(scores.stocks[order[i]]);
  std::sort(out.long_set.begin(), out.long_set.end());
  std::sort(out.short_set.begin(), out.short_set.end());
  return out;
}

std::size_t first_feasible_start(std::size_t window) { return first_feasible_as_of(window) + 1; }

Span resolve_span(const MarketPanel& panel, const std::optional<std::string>& start,
                  const std::optional<std::string>& end, std::size_t window) {
  const auto& cal = panel.calendar;
  const std::size_t min_start = first_feasible_start(window);
  auto first_feasible_text = [&] {
    return min_start < cal.size() ? cal.date(min_start) : std::string("(beyond the calendar)");
  };
  Span span;
  span.first = start ? cal.lower_bound(*start) : min_start;
  if (span.first < min_start)
    throw ValidationError("backtest span starts at " + cal.date(span.first) + ", before the first feasible start date " +
                          first_feasible_text() + " for a " + std::to_string(window) + "-day window");
  if (end) {
    const std::size_t after = cal.lower_bound(*end);
    const bool on = after < cal.size() && cal.date(after) == *end;
    const std::size_t last_plus_one = on ? after + 1 : after;
    if (last_plus_one == 0) return Span{1, 0};
    span.last = last_plus_one - 1;
  } else {
    span.last = cal.size() - 1;
  }
  if (!start && min_start >= cal.size())
    throw ValidationError("calendar too short: first feasible start date is beyond the last day " +
                          cal.date(cal.size() - 1));
  return span;
}

Backtester::Backtester(const FeatureStore& store, ModelSpec spec, Span span, BacktestOptions options)
    : store_(store), spec_(std::move(spec)), span_(span), options_(options), next_(span.first) {
  if (!span_.empty() && span_.first < first_feasible_start(options_.window)) {
    const std::size_t min_start = first_feasible_start(options_.window);
    throw ValidationError("infeasible backtest span; first feasible start date is " +
                          (min_start < store.panel().n_days() ? store.panel().calendar.date(min_start)
                                                              : std::string("beyond the calendar")));
  }
  if (!span_.empty() && span_.last >= store.panel().n_days()) throw ValidationError("backtest span runs off the calendar");
  for (int i = 0; i < kTranches; ++i) tranches_[static_cast<std::size_t>(i)].index = i;
  result_.model = spec_.name;
}

const Predictor& Backtester::refit(std::size_t day) {
  if (!prefetched_.count(day)) {
    // Fit this refresh and the next few in parallel; each fit is a pure
    // function of the store, so the order of completion is irrelevant.
    std::vector<std::size_t> days;
    const auto batch = static_cast<std::size_t>(std::max(options_.threads, 1));
    for (std::size_t r = day; days.size() < batch && r <= span_.last; r += kTranches) days.push_back(r);
    std::vector<std::optional<Predictor>> fitted(days.size());
    parallel_for(days.size(), options_.threads, [&](std::size_t i) {
      const TrainingWindow w = assemble_window(store_, days[i] - 1, options_.window);
      fitted[i] = Predictor::fit(w, spec_, FitOptions{1});
    });
    for (std::size_t i = 0; i < days.size(); ++i) prefetched_.emplace(days[i], std::move(*fitted[i]));
  }
  auto node = prefetched_.extract(day);
  model_ = std::move(node.mapped());
  return *model_;
}

void Backtester::check_leg(const Leg& leg, const char* what, std::size_t day) const {
  if (!options_.check_invariants) return;
  const double total = leg.total();
  if (std::abs(total - 1.0) > kWeightTolerance)
    throw InvariantViolation(std::string(what) + " weights sum to " + csv::format_double(total) + " on " +
                             store_.panel().calendar.date(day));
  if ((leg.weights.array() < 0.0).any() || leg.cash < 0.0)
    throw InvariantViolation(std::string(what) + " has a negative weight on " + store_.panel().calendar.date(day));
}

void Backtester::rebalance(Tranche& tranche, std::size_t day) {
  const MarketPanel& panel = store_.panel();
  const ScoreVector scores = score_universe(*model_, store_, day - 1);
  const Quintiles q = form_quintiles(scores, options_.quintile_override);

  Leg new_long = enter(q.long_set, panel, day, "long");
  Leg new_short = enter(q.short_set, panel, day, "short");
  Leg new_bench = enter(scores.stocks, panel, day, "benchmark");

  const std::string& date = panel.calendar.date(day);
  const bool had = tranche.state == Tranche::State::live;
  RebalanceRecord lr{date, tranche.index, Side::long_side, had ? weights_of(tranche.long_leg, panel) : Weights{},
                     weights_of(new_long, panel)};
  RebalanceRecord sr{date, tranche.index, Side::short_side, had ? weights_of(tranche.short_leg, panel) : Weights{},
                     weights_of(new_short, panel)};
  if (options_.check_invariants && had) {
    const double tl = one_way_turnover(lr.pre, lr.post), ts = one_way_turnover(sr.pre, sr.post);
    if (!(tl >= -kWeightTolerance && tl <= 1.0 + kWeightTolerance) ||
        !(tl + ts >= -kWeightTolerance && tl + ts <= 2.0 + kWeightTolerance))
      throw InvariantViolation("turnover out of bounds on " + date);
  }
  result_.rebalances.push_back(std::move(lr));
  result_.rebalances.push_back(std::move(sr));

  tranche.long_leg = std::move(new_long);
  tranche.short_leg = std::move(new_short);
  tranche.benchmark = std::move(new_bench);
  tranche.entry_day = day;
  tranche.state = Tranche::State::live;
  check_leg(tranche.long_leg, "long", day);
  check_leg(tranche.short_leg, "short", day);
}

void Backtester::step() {
  if (done()) throw std::logic_error("Backtester::step past the end of the span");
  const MarketPanel& panel = store_.panel();
  const std::size_t day = next_++;
  const std::size_t k = day - span_.first;
  if (k % kTranches == 0) {
    refit(day);
    result_.refresh_dates.push_back(panel.calendar.date(day));
  }
  const int today = static_cast<int>(k % kTranches);

  double sum_long = 0, sum_short = 0, sum_bench = 0;
  int live = 0;
  for (auto& t : tranches_) {
    const bool entry = t.index == today;
    if (entry) {
      rebalance(t, day);
    } else if (t.state != Tranche::State::live) {
      continue;
    }
    sum_long += mark(t.long_leg, panel, day, entry);
    sum_short += mark(t.short_leg, panel, day, entry);
    sum_bench += mark(t.benchmark, panel, day, entry);
    check_leg(t.long_leg, "long", day);
    check_leg(t.short_leg, "short", day);
    ++live;
  }
  const double n = static_cast<double>(live);
  long_.push_back(sum_long / n);
  short_.push_back(sum_short / n);
  bench_.push_back(sum_bench / n);
  result_.dates.push_back(panel.calendar.date(day));
  result_.live_tranches.push_back(live);
  result_.rebalanced_tranche.push_back(today);
}

BacktestResult Backtester::finish() && {
  result_.long_returns = to_vector(long_);
  result_.short_returns = to_vector(short_);
  result_.long_short_returns = result_.long_returns - result_.short_returns;
  result_.benchmark_returns = to_vector(bench_);
  result_.ramp_in_days = std::min<std::size_t>(kTranches - 1, result_.dates.size());
  return std::move(result_);
}

BacktestResult run_backtest(const FeatureStore& store, const ModelSpec& spec, Span span, const BacktestOptions& options) {
  Backtester bt(store, spec, span, options);
  while (!bt.done()) bt.step();
  return std::move(bt).finish();
}

void write_returns_csv(const std::filesystem::path& path, const BacktestResult& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "date,R_long,R_short,R_longshort,R_benchmark\n";
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto t = static_cast<Eigen::Index>(i);
    out << r.dates[i] << ',' << csv::format_double(r.long_returns(t)) << ',' << csv::format_double(r.short_returns(t))
        << ',' << csv::format_double(r.long_short_returns(t)) << ',' << csv::format_double(r.benchmark_returns(t))
        << '\n';
  }
}

void write_holdings_csv(const std::filesystem::path& path, const BacktestResult& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "date,tranche,side,stock_id,weight\n";
  for (const auto& rec : r.rebalances) {
    const std::string side(to_string(rec.side));
    for (const auto& [id, w] : rec.pre)
      out << rec.date << ',' << rec.tranche << ',' << side << "_drift," << id << ',' << csv::format_double(w) << '\n';
    for (const auto& [id, w] : rec.post)
      out << rec.date << ',' << rec.tranche << ',' << side << ',' << id << ',' << csv::format_double(w) << '\n';
  }
}

BacktestResult read_backtest(const std::filesystem::path& returns_csv, const std::filesystem::path& holdings_csv) {
  BacktestResult r;
  {
    csv::Reader in(returns_csv);
    const auto c_date = in.column("date"), c_l = in.column("R_long"), c_s = in.column("R_short"),
               c_ls = in.column("R_longshort"), c_b = in.column("R_benchmark");
    std::vector<double> l, s, ls, b;
    while (in.next()) {
      r.dates.push_back(in.text(c_date));
      l.push_back(in.number(c_l));
      s.push_back(in.number(c_s));
      ls.push_back(in.number(c_ls));
      b.push_back(in.number(c_b));
    }
    r.long_returns = to_vector(l);
    r.short_returns = to_vector(s);
    r.long_short_returns = to_vector(ls);
    r.benchmark_returns = to_vector(b);
    r.ramp_in_days = std::min<std::size_t>(kTranches - 1, r.dates.size());
  }
  {
    csv::Reader in(holdings_csv);
    const auto c_date = in.column("date"), c_t = in.column("tranche"), c_side = in.column("side"),
               c_id = in.column("stock_id"), c_w = in.column("weight");
    std::map<std::tuple<std::string, int, int>, std::size_t> at;
    while (in.next()) {
      std::string side = in.text(c_side);
      const bool drift = side.size() > 6 && side.compare(side.size() - 6, 6, "_drift") == 0;
      if (drift) side.resize(side.size() - 6);
      Side s;
      if (side == "long") s = Side::long_side;
      else if (side == "short") s = Side::short_side;
      else throw ParseError(in.where() + ": unknown side '" + in.text(c_side) + "'");
      const int tranche = static_cast<int>(in.number(c_t));
      const auto key = std::make_tuple(in.text(c_date), tranche, static_cast<int>(s));
      auto it = at.find(key);
      if (it == at.end()) {
        it = at.emplace(key, r.rebalances.size()).first;
        r.rebalances.push_back(RebalanceRecord{in.text(c_date), tranche, s, {}, {}});
      }
      auto& rec = r.rebalances[it->second];
      (drift ? rec.pre : rec.post).emplace_back(in.text(c_id), in.number(c_w));
    }
  }
  return r;
}

}  // namespace xsect

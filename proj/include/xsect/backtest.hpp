#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xsect/predictor.hpp"
#include "xsect/preprocess.hpp"

namespace xsect {

inline constexpr int kTranches = 5;
inline constexpr std::string_view kCashId = "$CASH";

struct ScoreVector {
  std::size_t day = 0;
  std::vector<std::size_t> stocks;
  Eigen::VectorXd scores;
};

// Scores the day's universe from its rank-scaled factor matrix.
ScoreVector score_universe(const Predictor& predictor, const FeatureStore& store, std::size_t day);
ScoreVector score_universe(const Predictor& predictor, const MarketPanel& panel, std::size_t day,
                           const FeatureOptions& options = {});

struct Quintiles {
  std::vector<std::size_t> long_set;
  std::vector<std::size_t> short_set;
};

// Top and bottom q = floor(n / 5) names by score; equal scores fall back to
// canonical stock order (earlier id ranks higher). `size_override` > 0
// forces q and lifts the n >= 5 requirement.
Quintiles form_quintiles(const ScoreVector& scores, std::size_t size_override = 0);

// Positions of one side of a tranche. Weights are fractions of the leg's
// value; a short leg is stored with positive weights.
struct Leg {
  std::vector<std::size_t> stocks;
  Eigen::VectorXd weights;
  double cash = 0.0;

  double total() const { return weights.sum() + cash; }
};

struct Tranche {
  enum class State { pending_entry, live };

  int index = 0;
  State state = State::pending_entry;
  std::size_t entry_day = 0;
  Leg long_leg;
  Leg short_leg;
  Leg benchmark;  // equal-weight universe on the same schedule
};

using Weights = std::vector<std::pair<std::string, double>>;  // sorted by id

enum class Side { long_side, short_side };
std::string_view to_string(Side side);

struct RebalanceRecord {
  std::string date;
  int tranche = 0;
  Side side = Side::long_side;
  Weights pre;   // drifted weights just before the rebalance
  Weights post;  // weights entered at the open
};

struct BacktestResult {
  std::string model;
  std::vector<std::string> dates;
  Eigen::VectorXd long_returns;
  Eigen::VectorXd short_returns;
  Eigen::VectorXd long_short_returns;
  Eigen::VectorXd benchmark_returns;
  std::vector<int> live_tranches;
  std::vector<int> rebalanced_tranche;
  std::vector<std::string> refresh_dates;
  // Entry weights of every rebalance; `pre` is empty for a first entry.
  std::vector<RebalanceRecord> rebalances;
  std::size_t ramp_in_days = 0;

  std::size_t size() const { return dates.size(); }
};

struct BacktestOptions {
  std::size_t window = 1000;
  int threads = 1;
  bool check_invariants = true;
  std::size_t quintile_override = 0;  // test mode: fixed q
};

// Calendar positions, inclusive; empty when first > last.
struct Span {
  std::size_t first = 1;
  std::size_t last = 0;

  bool empty() const { return first > last; }
  std::size_t size() const { return empty() ? 0 : last - first + 1; }
};

// Earliest span start for a given training-window length.
std::size_t first_feasible_start(std::size_t window);

// Resolves optional ISO bounds; defaults are the first feasible start and
// the last calendar day. Throws ValidationError naming the first feasible
// start date when `start` is too early.
Span resolve_span(const MarketPanel& panel, const std::optional<std::string>& start,
                  const std::optional<std::string>& end, std::size_t window);

// Walk-forward state machine: refit every 5 business days, rebalance one of
// five staggered tranches per day, mark every live tranche daily.
class Backtester {
 public:
  Backtester(const FeatureStore& store, ModelSpec spec, Span span, BacktestOptions options);

  bool done() const { return next_ > span_.last || span_.empty(); }
  std::size_t next_day() const { return next_; }
  // Advances one business day.
  void step();
  const std::array<Tranche, kTranches>& tranches() const { return tranches_; }
  const std::optional<Predictor>& current_model() const { return model_; }

  BacktestResult finish() &&;

 private:
  const Predictor& refit(std::size_t day);
  void rebalance(Tranche& tranche, std::size_t day);
  void check_leg(const Leg& leg, const char* what, std::size_t day) const;

  const FeatureStore& store_;
  ModelSpec spec_;
  Span span_;
  BacktestOptions options_;
  std::size_t next_;
  std::array<Tranche, kTranches> tranches_;
  std::optional<Predictor> model_;
  std::map<std::size_t, Predictor> prefetched_;
  std::vector<double> long_, short_, bench_;
  BacktestResult result_;
};

BacktestResult run_backtest(const FeatureStore& store, const ModelSpec& spec, Span span,
                            const BacktestOptions& options = {});

// returns.csv: date,R_long,R_short,R_longshort,R_benchmark
void write_returns_csv(const std::filesystem::path& path, const BacktestResult& result);
// holdings.csv: date,tranche,side,stock_id,weight. Side is long/short for
// entry weights and long_drift/short_drift for the drifted weights they
// replaced, so turnover can be recomputed from the file alone.
void write_holdings_csv(const std::filesystem::path& path, const BacktestResult& result);
// Rebuilds the return series and rebalance records from the two files.
BacktestResult read_backtest(const std::filesystem::path& returns_csv, const std::filesystem::path& holdings_csv);

}  // namespace xsect

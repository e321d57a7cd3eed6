#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <vector>

#include "xsect/error.hpp"
#include "xsect/factors.hpp"
#include "xsect/market_data.hpp"

namespace xsect {

// Cross-sectional rank scaling into (0, 1]. Finite entries get ascending
// ranks 1..m (ties share the average rank) divided by the vector length n;
// non-finite entries are imputed with the mid-rank (n + 1) / (2n).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> rank_scale(const Eigen::MatrixBase<Derived>& raw) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = raw.size();
  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isfinite(raw(i))) order.push_back(i);
  if (order.empty()) throw ValidationError("rank_scale: every value is missing");
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return raw(a) < raw(b); });

  const Scalar two_n = Scalar(2 * n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(n, Scalar(n + 1) / two_n);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && raw(order[j + 1]) == raw(order[i])) ++j;
    // average of 1-based ranks i+1..j+1, doubled to stay integral
    const Scalar value = Scalar(i + j + 2) / two_n;
    for (std::size_t k = i; k <= j; ++k) out(order[k]) = value;
    i = j + 1;
  }
  return out;
}

// Column-wise rank_scale of a stocks x factors matrix.
Eigen::MatrixXd rank_scale_columns(const Eigen::MatrixXd& raw);

// Five-day tradable return p_close(t+5) / p_open(t+1) - 1; NaN when either
// price is absent or off the calendar.
inline constexpr std::size_t kTargetHorizon = 5;
double target_return(const MarketPanel& panel, std::size_t stock, std::size_t t);

struct FeatureOptions {
  int max_missing = kDefaultMaxMissing;
};

// Everything the walk-forward loop needs for one day. `features` depends
// only on data stamped <= day; `targets` looks kTargetHorizon days ahead
// and may only be consumed by windows whose as-of date is >= day + 5.
struct DaySlice {
  std::size_t day = 0;
  std::vector<std::size_t> stocks;
  std::vector<Exclusion> excluded;
  Eigen::MatrixXd raw;          // n x 33 factor values
  Eigen::MatrixXd features;     // n x 33 rank-scaled
  Eigen::VectorXd raw_targets;  // NaN when not computable
  Eigen::VectorXd targets;      // rank-scaled among finite raw targets, NaN otherwise
};

// Builds the slice for `day`; nullopt when no stock survives.
std::optional<DaySlice> make_slice(const MarketPanel& panel, std::size_t day, const FeatureOptions& options = {});

// Precomputed slices for every calendar day. Holds a reference to the
// panel, which must outlive the store.
class FeatureStore {
 public:
  explicit FeatureStore(const MarketPanel& panel, FeatureOptions options = {}, int threads = 1);

  const MarketPanel& panel() const { return *panel_; }
  const FeatureOptions& options() const { return options_; }
  // nullptr when the day has no tradable universe.
  const DaySlice* slice(std::size_t day) const;

 private:
  const MarketPanel* panel_;
  FeatureOptions options_;
  std::vector<std::optional<DaySlice>> slices_;
};

// Stacked (features, scaled target) pairs for sample days
// as_of - length - 4 ... as_of - 5.
struct TrainingWindow {
  std::size_t as_of = 0;
  std::size_t length = 0;
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  std::vector<std::size_t> stocks;
  std::vector<std::size_t> days;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
};

// Earliest as-of position with a full window of feasible sample days.
std::size_t first_feasible_as_of(std::size_t length);

TrainingWindow assemble_window(const FeatureStore& store, std::size_t as_of, std::size_t length);
// Same, computing only the slices it needs straight from the panel.
TrainingWindow assemble_window(const MarketPanel& panel, std::size_t as_of, std::size_t length,
                               const FeatureOptions& options = {});

// date,stock_id,x1..x33,y_scaled
void write_window_csv(const std::filesystem::path& path, const MarketPanel& panel, const TrainingWindow& window);

}  // namespace xsect

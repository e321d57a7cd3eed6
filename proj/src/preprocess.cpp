#include "xsect/preprocess.hpp"

#include <deque>
#include <fstream>
#include <limits>

#include "xsect/csv.hpp"
#include "xsect/parallel.hpp"

namespace xsect {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename SliceAt>
TrainingWindow stack_window(const MarketPanel& panel, std::size_t as_of, std::size_t length, SliceAt&& slice_at) {
  if (length == 0) throw ValidationError("training window length must be >= 1");
  if (as_of >= panel.n_days()) throw ValidationError("window as-of position is off the calendar");
  const std::size_t first_ok = first_feasible_as_of(length);
  if (as_of < first_ok) {
    std::string msg = "insufficient history for a " + std::to_string(length) + "-day window at " +
                      panel.calendar.date(as_of) + "; first feasible as-of date is ";
    msg += first_ok < panel.n_days() ? panel.calendar.date(first_ok) : std::string("beyond the calendar");
    throw ValidationError(msg);
  }

  TrainingWindow w;
  w.as_of = as_of;
  w.length = length;
  std::vector<const DaySlice*> used;
  std::deque<std::optional<DaySlice>> owned;
  std::size_t k = 0;
  for (std::size_t t = as_of - length - (kTargetHorizon - 1); t + kTargetHorizon <= as_of; ++t) {
    const DaySlice* s = slice_at(t, owned);
    if (s == nullptr) continue;
    used.push_back(s);
    k += static_cast<std::size_t>(s->targets.array().isFinite().count());
  }
  w.features.resize(static_cast<Eigen::Index>(k), kNumFactors);
  w.targets.resize(static_cast<Eigen::Index>(k));
  w.stocks.reserve(k);
  w.days.reserve(k);
  Eigen::Index row = 0;
  for (const DaySlice* s : used) {
    for (Eigen::Index i = 0; i < s->targets.size(); ++i) {
      if (!std::isfinite(s->targets(i))) continue;
      w.features.row(row) = s->features.row(i);
      w.targets(row) = s->targets(i);
      w.stocks.push_back(s->stocks[static_cast<std::size_t>(i)]);
      w.days.push_back(s->day);
      ++row;
    }
  }
  if (k == 0) throw ValidationError("training window at " + panel.calendar.date(as_of) + " has no samples");
  return w;
}

}  // namespace

Eigen::MatrixXd rank_scale_columns(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    if (raw.col(j).array().isFinite().any())
      out.col(j) = rank_scale(raw.col(j));
    else
      out.col(j).setConstant(double(raw.rows() + 1) / double(2 * raw.rows()));
  }
  return out;
}

double target_return(const MarketPanel& panel, std::size_t stock, std::size_t t) {
  if (t + kTargetHorizon >= panel.n_days()) return kNaN;
  const double entry = panel.open(stock, t + 1);
  const double exit = panel.close(stock, t + kTargetHorizon);
  if (!std::isfinite(entry) || !std::isfinite(exit)) return kNaN;
  return exit / entry - 1.0;
}

std::optional<DaySlice> make_slice(const MarketPanel& panel, std::size_t day, const FeatureOptions& options) {
  const Universe u = universe_at(panel, day);
  if (u.empty()) return std::nullopt;
  DaySlice s;
  s.day = day;
  std::vector<FactorRow> rows;
  for (std::size_t stock : u.stocks) {
    FactorRow row = stock_factors(panel, stock, day);
    const int missing = static_cast<int>((!row.array().isFinite()).count());
    if (missing > options.max_missing) {
      s.excluded.push_back({stock, missing});
      continue;
    }
    s.stocks.push_back(stock);
    rows.push_back(row);
  }
  if (rows.empty()) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(rows.size());
  s.raw.resize(n, kNumFactors);
  for (Eigen::Index i = 0; i < n; ++i) s.raw.row(i) = rows[static_cast<std::size_t>(i)].transpose();
  s.features = rank_scale_columns(s.raw);

  s.raw_targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.raw_targets(i) = target_return(panel, s.stocks[static_cast<std::size_t>(i)], day);
  s.targets = Eigen::VectorXd::Constant(n, kNaN);
  std::vector<Eigen::Index> valid;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isfinite(s.raw_targets(i))) valid.push_back(i);
  if (!valid.empty()) {
    Eigen::VectorXd present(static_cast<Eigen::Index>(valid.size()));
    for (std::size_t k = 0; k < valid.size(); ++k) present(static_cast<Eigen::Index>(k)) = s.raw_targets(valid[k]);
    const Eigen::VectorXd scaled = rank_scale(present);
    for (std::size_t k = 0; k < valid.size(); ++k) s.targets(valid[k]) = scaled(static_cast<Eigen::Index>(k));
  }
  return s;
}

FeatureStore::FeatureStore(const MarketPanel& panel, FeatureOptions options, int threads)
    : panel_(&panel), options_(options), slices_(panel.n_days()) {
  parallel_for(panel.n_days(), threads, [&](std::size_t d) {
    if (d >= kFactorHistory) slices_[d] = make_slice(panel, d, options_);
  });
}

const DaySlice* FeatureStore::slice(std::size_t day) const {
  if (day >= slices_.size() || !slices_[day]) return nullptr;
  return &*slices_[day];
}

std::size_t first_feasible_as_of(std::size_t length) {
  return kFactorHistory + length + (kTargetHorizon - 1);
}

TrainingWindow assemble_window(const FeatureStore& store, std::size_t as_of, std::size_t length) {
  return stack_window(store.panel(), as_of, length,
                      [&](std::size_t t, std::deque<std::optional<DaySlice>>&) { return store.slice(t); });
}

TrainingWindow assemble_window(const MarketPanel& panel, std::size_t as_of, std::size_t length,
                               const FeatureOptions& options) {
  return stack_window(panel, as_of, length, [&](std::size_t t, std::deque<std::optional<DaySlice>>& owned) {
    owned.push_back(make_slice(panel, t, options));
    return owned.back() ? &*owned.back() : nullptr;
  });
}

void write_window_csv(const std::filesystem::path& path, const MarketPanel& panel, const TrainingWindow& window) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "date,stock_id";
  for (int k = 1; k <= kNumFactors; ++k) out << ",x" << k;
  out << ",y_scaled\n";
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << panel.calendar.date(window.days[i]) << ',' << panel.stocks[window.stocks[i]];
    for (int k = 0; k < kNumFactors; ++k) out << ',' << csv::format_double(window.features(r, k));
    out << ',' << csv::format_double(window.targets(r)) << '\n';
  }
}

}  // namespace xsect

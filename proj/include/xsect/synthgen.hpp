#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "xsect/market_data.hpp"

namespace xsect {

struct SynthSpec {
  std::size_t n_stocks = 200;
  std::size_t n_days = 1500;
  std::uint64_t seed = 0;
  double daily_vol = 0.02;
  // Target cross-sectional correlation between the chosen factor and the
  // following open-to-close 5-day return.
  double signal_strength = 0.0;
  int signal_factor = 1;
  int fundamental_cadence = 3;  // months between fundamental records
  std::string start = "2013-01-04";
  // Raw per-day drift per unit z-score, in units of daily_vol. Bypasses
  // the calibrated mapping from signal_strength when set.
  std::optional<double> loading;
};

// Throws ConfigError on an invalid spec.
void validate(const SynthSpec& spec);

// Per-day intraday log drift per unit z-score, chosen so the planted
// 5-day signal has mean rank correlation signal_strength with the target.
double planted_loading(const SynthSpec& spec);

// Mean over days of the cross-sectional rank correlation between a factor
// and the next open-to-close 5-day return.
double mean_rank_ic(const MarketPanel& panel, int factor_no);

MarketPanel generate_panel(const SynthSpec& spec);
// generate_panel + write_panel.
void generate(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace xsect

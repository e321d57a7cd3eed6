#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "xsect/market_data.hpp"

namespace xsect {

inline constexpr int kNumFactors = 33;
inline constexpr int kDefaultMaxMissing = 8;

// Trading-day horizons of factors No.1-8.
inline constexpr std::array<int, 8> kReturnHorizons = {1, 2, 3, 5, 10, 20, 40, 60};
// Averaging windows of factors No.10-12 (relative to the 60-day mean).
inline constexpr std::array<int, 3> kLiquidityWindows = {5, 10, 20};
// Revision horizons of factors No.13-15 and No.16-18.
inline constexpr std::array<int, 3> kRevisionHorizons = {5, 10, 20};

using FactorRow = Eigen::Matrix<double, kNumFactors, 1>;

// Each group returns NaN for values that cannot be computed from the data
// stamped at or before `day`.
Eigen::Matrix<double, 8, 1> price_momentum_factors(const MarketPanel& panel, std::size_t stock, std::size_t day);
Eigen::Matrix<double, 4, 1> liquidity_factors(const MarketPanel& panel, std::size_t stock, std::size_t day);
Eigen::Matrix<double, 6, 1> forecast_revision_factors(const MarketPanel& panel, std::size_t stock, std::size_t day);
Eigen::Matrix<double, 15, 1> fundamental_factors(const MarketPanel& panel, std::size_t stock, std::size_t day);

FactorRow stock_factors(const MarketPanel& panel, std::size_t stock, std::size_t day);
// Single factor by its 1-based number.
double factor_value(const MarketPanel& panel, std::size_t stock, std::size_t day, int factor_no);

struct Exclusion {
  std::size_t stock = 0;
  int missing = 0;
};

// Raw factor values for one day; row order follows the universe order.
struct FactorMatrix {
  std::size_t day = 0;
  std::vector<std::size_t> stocks;
  Eigen::MatrixXd values;  // stocks x 33, NaN = missing
  std::vector<Exclusion> excluded;
};

// Stocks with more than max_missing missing factors are dropped and logged
// in `excluded`. Throws ValidationError when nothing is left.
FactorMatrix build_factor_matrix(const MarketPanel& panel, const Universe& universe,
                                 int max_missing = kDefaultMaxMissing);

// stock_id,date,f1..f33 with empty cells for missing values.
void write_factors_csv(const std::filesystem::path& path, const MarketPanel& panel,
                       std::span<const FactorMatrix> matrices);

}  // namespace xsect

#include "doctest.h"

#include <cmath>

#include "support.hpp"
#include "xsect/factors.hpp"

using namespace xsect;

namespace {
const double kNaN = std::nan("");
}

TEST_CASE("price momentum: flat, one-day, geometric") {
  MarketPanel p = test::flat_panel(1, 61);
  CHECK(price_momentum_factors(p, 0, 60).isZero(0.0));

  p.close(0, 59) = 100.0;
  p.close(0, 60) = 110.0;
  CHECK(factor_value(p, 0, 60, 1) == doctest::Approx(0.10).epsilon(1e-15));

  for (int k = 0; k <= 60; ++k) p.close(0, k) = 100.0 * std::pow(1.01, k);
  const auto m = price_momentum_factors(p, 0, 60);
  CHECK(m(3) == doctest::Approx(std::pow(1.01, 5) - 1.0).epsilon(1e-13));
  CHECK(m(4) == doctest::Approx(0.10462212541120).epsilon(1e-12));
  CHECK(m(7) == doctest::Approx(std::pow(1.01, 60) - 1.0).epsilon(1e-13));
}

TEST_CASE("price momentum: insufficient history is missing") {
  MarketPanel p = test::flat_panel(1, 61);
  const auto m = price_momentum_factors(p, 0, 30);
  CHECK(m(5) == 0.0);  // 20-day
  CHECK(std::isnan(m(6)));
  CHECK(std::isnan(m(7)));
}

TEST_CASE("liquidity factors") {
  MarketPanel p = test::flat_panel(1, 61);
  auto l = liquidity_factors(p, 0, 60);
  CHECK(l(0) == 100000.0);
  CHECK(l(1) == 1.0);
  CHECK(l(2) == 1.0);
  CHECK(l(3) == 1.0);

  for (int d = 56; d <= 60; ++d) p.volume(0, d) = 2000.0;
  l = liquidity_factors(p, 0, 60);
  // hand sum of the 60-term mean: 55 days at v and 5 at 2v
  double sum60 = 0.0;
  for (int d = 1; d <= 60; ++d) sum60 += p.close(0, d) * p.volume(0, d);
  CHECK(l(0) == doctest::Approx(sum60 / 60.0).epsilon(1e-15));
  CHECK(l(1) == doctest::Approx(2.0 / (65.0 / 60.0)).epsilon(1e-13));
  CHECK(l(1) == doctest::Approx(1.84615).epsilon(1e-5));

  p.volume.setZero();
  l = liquidity_factors(p, 0, 60);
  CHECK(l(0) == 0.0);
  CHECK(std::isnan(l(1)));
  CHECK(std::isnan(l(2)));
  CHECK(std::isnan(l(3)));
}

TEST_CASE("forecast revisions") {
  MarketPanel p = test::flat_panel(1, 61);
  CHECK(forecast_revision_factors(p, 0, 60).isZero(0.0));

  p.op_income_forecast(0, 55) = 100.0;
  p.op_income_forecast(0, 60) = 120.0;
  CHECK(factor_value(p, 0, 60, 13) == doctest::Approx(0.20).epsilon(1e-15));

  MarketPanel q = test::flat_panel(1, 61);
  q.op_income_forecast(0, 50) = kNaN;
  const auto f = forecast_revision_factors(q, 0, 60);
  CHECK(f(0) == 0.0);
  CHECK(std::isnan(f(1)));
  CHECK(f(2) == 0.0);
  CHECK(f(4) == 0.0);

  q.target_price_forecast(0, 40) = -1.0;
  CHECK(std::isnan(factor_value(q, 0, 60, 18)));
}

TEST_CASE("fundamental factors") {
  MarketPanel p = test::flat_panel(1, 70);
  const std::size_t day = 66;
  const std::size_t me = *p.calendar.month_end_at_or_before(day);
  const std::size_t rec = *p.fundamentals_asof(0, day);

  SUBCASE("No.19 = net assets / market value") {
    p.shares_outstanding(0, me) = 1.0;
    p.close(0, me) = 100.0;
    p.fundamentals[0][rec].net_assets = 50.0;
    CHECK(factor_value(p, 0, day, 19) == 0.5);
  }
  SUBCASE("market value is taken at the month-end, not the day") {
    const double before = factor_value(p, 0, day, 19);
    p.close(0, day) = 500.0;
    CHECK(factor_value(p, 0, day, 19) == before);
  }
  SUBCASE("unchanged total assets give No.31 = 0") {
    CHECK(factor_value(p, 0, day, 31) == 0.0);
    p.fundamentals[0][rec].total_assets *= 1.1;
    CHECK(factor_value(p, 0, day, 31) == doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("zero current liabilities -> No.29 missing") {
    p.fundamentals[0][rec].current_liabilities = 0.0;
    CHECK(std::isnan(factor_value(p, 0, day, 29)));
  }
  SUBCASE("formula spot checks") {
    const auto& r = p.fundamentals[0][rec];
    const double mv = p.close(0, me) * p.shares_outstanding(0, me);
    const auto f = fundamental_factors(p, 0, day);
    CHECK(f(1) == r.net_profits / mv);
    CHECK(f(5) == r.net_profits / r.net_assets);
    CHECK(f(7) == r.nopat / (r.debt + r.net_assets));
    CHECK(f(8) == -(r.delta_working_capital - r.depreciation) / r.total_assets);
    CHECK(f(14) == 0.0);
  }
  SUBCASE("first record has no previous period") {
    const std::size_t first_me = *p.calendar.month_end_at_or_before(25);
    const auto f = fundamental_factors(p, 0, first_me + 1);
    CHECK(std::isfinite(f(0)));
    CHECK(std::isnan(f(12)));
    CHECK(std::isnan(f(13)));
    CHECK(std::isnan(f(14)));
  }
}

TEST_CASE("monthly constancy of No.19-33") {
  MarketPanel p = test::random_panel(2, 120, 5);
  for (std::size_t d = 61; d + 1 < p.n_days(); ++d) {
    if (p.calendar.month_end_at_or_before(d) != p.calendar.month_end_at_or_before(d + 1)) continue;
    const auto a = fundamental_factors(p, 1, d), b = fundamental_factors(p, 1, d + 1);
    for (int k = 0; k < 15; ++k) CHECK(((std::isnan(a(k)) && std::isnan(b(k))) || a(k) == b(k)));
  }
}

TEST_CASE("scale equivariance of returns") {
  MarketPanel p = test::random_panel(1, 70, 9);
  const auto before = price_momentum_factors(p, 0, 69);
  p.close *= 1024.0;  // power of two: exact scaling
  const auto after = price_momentum_factors(p, 0, 69);
  CHECK(before == after);
}

TEST_CASE("build_factor_matrix: exclusion threshold") {
  MarketPanel p = test::flat_panel(5, 70);
  const std::size_t day = 66;
  FactorMatrix m = build_factor_matrix(p, universe_at(p, day));
  CHECK(m.values.rows() == 5);
  CHECK(m.values.cols() == 33);
  CHECK(m.values.array().isFinite().all());
  CHECK(m.excluded.empty());

  for (std::size_t d = 0; d < p.n_days(); ++d) {
    p.op_income_forecast(1, d) = kNaN;
    p.target_price_forecast(1, d) = kNaN;
  }
  m = build_factor_matrix(p, universe_at(p, day));
  CHECK(m.values.rows() == 5);
  CHECK(m.values.row(1).array().isNaN().count() == 6);

  // twelve missing: forecasts (6) plus six fundamental ratios
  auto& r = p.fundamentals[3][*p.fundamentals_asof(3, day)];
  r.total_assets = 0.0;         // No.25, 27, 28, 30, 33
  r.current_liabilities = 0.0;  // No.29
  for (std::size_t d = 0; d < p.n_days(); ++d) {
    p.op_income_forecast(3, d) = kNaN;
    p.target_price_forecast(3, d) = kNaN;
  }
  CHECK(stock_factors(p, 3, day).array().isNaN().count() == 12);
  m = build_factor_matrix(p, universe_at(p, day));
  CHECK(m.values.rows() == 4);
  REQUIRE(m.excluded.size() == 1);
  CHECK(m.excluded[0].stock == 3);
  CHECK(m.excluded[0].missing == 12);
  CHECK(m.stocks == std::vector<std::size_t>{0, 1, 2, 4});
}

TEST_CASE("build_factor_matrix: empty result is an error") {
  MarketPanel p = test::flat_panel(2, 70, false);
  CHECK_THROWS(build_factor_matrix(p, universe_at(p, 65)));
}

TEST_CASE("factor values ignore data stamped after the day") {
  const MarketPanel base = test::random_panel(3, 130, 21);
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t day = 60 + rng() % 60;
    MarketPanel q = base;
    const std::size_t later = day + 1 + rng() % (q.n_days() - day - 1);
    const auto s = static_cast<Eigen::Index>(rng() % 3);
    q.close(s, later) *= 1.7;
    q.open(s, later) *= 0.6;
    q.volume(s, later) += 5000;
    q.op_income_forecast(s, later) *= 3.0;
    q.target_price_forecast(s, later) *= 0.2;
    for (std::size_t st = 0; st < 3; ++st) {
      const FactorRow a = stock_factors(base, st, day), b = stock_factors(q, st, day);
      for (int k = 0; k < kNumFactors; ++k) CHECK(((std::isnan(a(k)) && std::isnan(b(k))) || a(k) == b(k)));
    }
  }
}

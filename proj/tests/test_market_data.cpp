#include "doctest.h"

#include "support.hpp"
#include "xsect/calendar.hpp"
#include "xsect/csv.hpp"
#include "xsect/error.hpp"
#include "xsect/market_data.hpp"

using namespace xsect;
using xsect::test::TempDir;
using xsect::test::write_file;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

const char* kPrices2x3 =
    "stock_id,date,open,close,volume,shares_outstanding\n"
    "B,2020-01-02,10,11,100,1000\n"
    "A,2020-01-02,20,21,100,1000\n"
    "A,2020-01-03,21,22,100,1000\n"
    "B,2020-01-03,11,12,100,1000\n"
    "A,2020-01-06,22,23,100,1000\n"
    "B,2020-01-06,12,13,100,1000\n";

}  // namespace

TEST_CASE("iso dates") {
  CHECK(is_iso_date("2020-02-29"));
  CHECK_FALSE(is_iso_date("2019-02-29"));
  CHECK_FALSE(is_iso_date("2020-1-02"));
  CHECK_FALSE(is_iso_date("2020-13-01"));
  CHECK_FALSE(is_iso_date("20200102"));
}

TEST_CASE("calendar validation and lookups") {
  CHECK_THROWS_AS(TradingCalendar(std::vector<std::string>{}), ValidationError);
  CHECK_THROWS_AS(TradingCalendar({"2020-01-03", "2020-01-02"}), ValidationError);
  CHECK_THROWS_AS(TradingCalendar({"2020-01-02", "2020-01-02"}), ValidationError);

  TradingCalendar cal({"2020-01-30", "2020-01-31", "2020-02-03", "2020-02-28", "2020-03-02"});
  CHECK(cal.index_of("2020-02-03") == 2);
  CHECK_THROWS_AS(cal.index_of("2020-02-01"), ValidationError);
  CHECK(cal.lower_bound("2020-02-01") == 2);
  CHECK(cal.lower_bound("2021-01-01") == cal.size());
  CHECK_FALSE(cal.is_month_end(0));
  CHECK(cal.is_month_end(1));
  CHECK(cal.is_month_end(3));
  CHECK_FALSE(cal.is_month_end(4));  // last day: month may continue
  CHECK(cal.month_end_at_or_before(2) == 1u);
  CHECK_FALSE(cal.month_end_at_or_before(0).has_value());
}

TEST_CASE("weekday calendar skips weekends") {
  const auto days = weekdays_from("2013-01-05", 3);  // a Saturday
  REQUIRE(days.size() == 3);
  CHECK(days[0] == "2013-01-07");
  CHECK(days[1] == "2013-01-08");
  CHECK(days[2] == "2013-01-09");
}

TEST_CASE("csv number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0})
    CHECK(std::stod(csv::format_double(v)) == v);
  CHECK(csv::format_double(std::nan("")).empty());
}

TEST_CASE("load_panel: well-formed 2 x 3") {
  TempDir dir("md");
  write_file(dir / "prices.csv", kPrices2x3);
  PanelPaths paths;
  paths.prices = dir / "prices.csv";
  const MarketPanel p = load_panel(paths);
  CHECK(p.n_stocks() == 2);
  CHECK(p.n_days() == 3);
  CHECK(p.stocks[0] == "A");
  CHECK((p.close.array().isFinite()).count() == 6);
  CHECK(p.close(1, 2) == 13.0);
  CHECK(p.member.all());
}

TEST_CASE("load_panel errors") {
  TempDir dir("md");
  PanelPaths paths;
  paths.prices = dir / "prices.csv";

  write_file(paths.prices, "stock_id,date,open,close,volume,shares_outstanding\n");
  CHECK(error_of([&] { load_panel(paths); }).find("no rows") != std::string::npos);

  write_file(paths.prices,
             "stock_id,date,open,close,volume,shares_outstanding\n"
             "A,2020-01-02,10,11,100,1000\nZ,2020-01-02,10,-1.0,100,1000\n");
  const std::string neg = error_of([&] { load_panel(paths); });
  CHECK(neg.find("Z") != std::string::npos);
  CHECK(neg.find("2020-01-02") != std::string::npos);

  write_file(paths.prices,
             "stock_id,date,open,close,volume,shares_outstanding\n"
             "A,2020-01-02,10,11,100,1000\nA,2020-01-02,10,11,100,1000\n");
  CHECK_THROWS_AS(load_panel(paths), ValidationError);

  write_file(paths.prices,
             "stock_id,date,open,close,volume,shares_outstanding\n"
             "A,2020-01-02,10,abc,100,1000\n");
  const std::string bad = error_of([&] { load_panel(paths); });
  CHECK(bad.find("prices.csv:2") != std::string::npos);

  write_file(paths.prices, kPrices2x3);
  paths.forecasts = dir / "forecasts.csv";
  write_file(paths.forecasts,
             "stock_id,date,op_income_forecast,target_price_forecast\nA,2020-01-04,1,2\n");
  CHECK_THROWS_AS(load_panel(paths), ValidationError);  // off-calendar
}

TEST_CASE("price gap inside membership span is rejected") {
  TempDir dir("md");
  PanelPaths paths;
  paths.prices = dir / "prices.csv";
  paths.membership = dir / "membership.csv";
  write_file(paths.prices,
             "stock_id,date,open,close,volume,shares_outstanding\n"
             "A,2020-01-02,10,11,100,1000\nA,2020-01-06,10,11,100,1000\n"
             "B,2020-01-02,10,11,100,1000\nB,2020-01-03,10,11,100,1000\nB,2020-01-06,10,11,100,1000\n");
  write_file(paths.membership,
             "stock_id,date,is_member\nA,2020-01-02,1\nA,2020-01-03,1\nA,2020-01-06,1\n");
  CHECK_THROWS_AS(load_panel(paths), ValidationError);
}

TEST_CASE("write_panel / load_panel round trip is exact") {
  const MarketPanel p = test::random_panel(4, 70, 11);
  TempDir dir("md");
  write_panel(p, dir.path());
  const MarketPanel q = load_panel(PanelPaths::in_directory(dir.path()));
  CHECK(identical(p, q));
  const MarketPanel r = load_panel(PanelPaths::in_directory(dir.path()));
  CHECK(identical(q, r));
}

TEST_CASE("fundamentals are visible from their month-end, with optional lag") {
  MarketPanel p = test::flat_panel(1, 70);
  const std::size_t me = *p.calendar.month_end_at_or_before(40);
  CHECK(p.fundamentals_asof(0, me).has_value());
  CHECK(p.calendar.date(p.visible_from[0][*p.fundamentals_asof(0, me)]) == p.calendar.date(me));
  p.index_fundamentals(2);
  const auto k = p.fundamentals_asof(0, me);
  REQUIRE(k.has_value());
  CHECK(p.fundamentals[0][*k].month_end < p.calendar.date(me));
}

TEST_CASE("universe_at") {
  MarketPanel p = test::flat_panel(5, 80);
  SUBCASE("all members with history, sorted") {
    const Universe u = universe_at(p, 60);
    CHECK(u.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(u.stocks[i] == i);
  }
  SUBCASE("insufficient history") {
    CHECK(universe_at(p, 59).empty());
    for (std::size_t d = 0; d < 70; ++d) {
      p.close(2, d) = std::nan("");
      p.open(2, d) = std::nan("");
      p.member(2, d) = false;
    }
    const Universe u = universe_at(p, 79);  // listed 10 days ago
    CHECK(u.size() == 4);
    CHECK(std::find(u.stocks.begin(), u.stocks.end(), 2u) == u.stocks.end());
  }
  SUBCASE("membership false") {
    p.member(3, 70) = false;
    const Universe u = universe_at(p, 70);
    CHECK(u.size() == 4);
    CHECK(universe_at(p, 71).size() == 5);
  }
  CHECK_THROWS(universe_at(p, 500));
  CHECK_THROWS(universe_at(p, std::string_view("1999-01-01")));
}

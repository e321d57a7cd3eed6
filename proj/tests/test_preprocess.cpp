#include "doctest.h"

#include <random>

#include "support.hpp"
#include "xsect/error.hpp"
#include "xsect/preprocess.hpp"

using namespace xsect;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Brute-force average rank: 1 + #smaller + (#equal - 1) / 2.
Eigen::VectorXd rank_oracle(const Eigen::VectorXd& x) {
  const auto n = x.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(x(i))) {
      out(i) = (n + 1.0) / (2.0 * n);
      continue;
    }
    double less = 0, equal = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(x(j))) continue;
      less += x(j) < x(i);
      equal += x(j) == x(i);
    }
    out(i) = (1.0 + less + (equal - 1.0) / 2.0) / static_cast<double>(n);
  }
  return out;
}

}  // namespace

TEST_CASE("rank_scale examples") {
  CHECK(rank_scale(vec({42.0}))(0) == 1.0);
  CHECK(rank_scale(vec({3.0, 1.0, 2.0})).isApprox(vec({1.0, 1.0 / 3.0, 2.0 / 3.0}), 1e-15));
  CHECK(rank_scale(vec({5.0, 5.0, 1.0})).isApprox(vec({5.0 / 6.0, 5.0 / 6.0, 1.0 / 3.0}), 1e-15));
  const Eigen::VectorXd m = rank_scale(vec({2.0, std::nan(""), 1.0, 3.0}));
  CHECK(m(1) == 5.0 / 8.0);
  CHECK(m(3) == 3.0 / 4.0);  // divisor stays n = 4
  CHECK_THROWS_AS(rank_scale(vec({std::nan(""), std::nan("")})), ValidationError);
}

TEST_CASE("rank_scale against a brute-force oracle, with properties") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 40);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = small(rng) == 0 ? std::nan("") : small(rng) - 3.0;
    if (!x.array().isFinite().any()) x(0) = 1.0;
    const Eigen::VectorXd r = rank_scale(x);
    CHECK(r == rank_oracle(x));
    CHECK((r.array() > 0.0).all());
    CHECK((r.array() <= 1.0).all());
    // strictly increasing transform
    Eigen::VectorXd t = x;
    for (Eigen::Index i = 0; i < n; ++i) t(i) = std::exp(3.0 * x(i)) + 7.0;
    CHECK(rank_scale(t) == r);
    // untied maximum scales to exactly 1
    Eigen::Index arg;
    const double mx = x.array().isFinite().select(x, -1e300).maxCoeff(&arg);
    if ((x.array() == mx).count() == 1 && x.array().isFinite().all()) CHECK(r(arg) == 1.0);
  }
}

TEST_CASE("target_return") {
  MarketPanel p = test::flat_panel(1, 20, false);
  p.open(0, 6) = 100.0;
  p.close(0, 10) = 105.0;
  CHECK(target_return(p, 0, 5) == doctest::Approx(0.05).epsilon(1e-15));
  p.close(0, 10) = 100.0;
  CHECK(target_return(p, 0, 5) == 0.0);
  p.open(0, 6) = 200.0;
  p.close(0, 10) = 150.0;
  CHECK(target_return(p, 0, 5) == -0.25);
  CHECK(std::isnan(target_return(p, 0, 15)));  // off the calendar
  p.open(0, 6) = std::nan("");
  CHECK(std::isnan(target_return(p, 0, 5)));
}

TEST_CASE("assemble_window: sample days and counts") {
  CHECK(first_feasible_as_of(1) == 65);
  CHECK(first_feasible_as_of(1000) == 1064);

  MarketPanel p = test::random_panel(6, 90, 4);
  SUBCASE("N = 1 uses only T - 5") {
    const TrainingWindow w = assemble_window(p, 80, 1);
    CHECK(w.size() == 6);
    for (auto d : w.days) CHECK(d == 75);
    CHECK(w.features.cols() == 33);
    CHECK((w.features.array() > 0).all());
    CHECK((w.features.array() <= 1).all());
  }
  SUBCASE("N = 3 with universes of 4, 5, 6") {
    const std::size_t T = 80;
    p.member(4, T - 7) = false;
    p.member(5, T - 7) = false;
    p.member(5, T - 6) = false;
    const TrainingWindow w = assemble_window(p, T, 3);
    CHECK(w.size() == 15);
    CHECK(std::count(w.days.begin(), w.days.end(), T - 7) == 4);
    CHECK(std::count(w.days.begin(), w.days.end(), T - 6) == 5);
    CHECK(std::count(w.days.begin(), w.days.end(), T - 5) == 6);
  }
  SUBCASE("missing target drops the sample") {
    p.close(2, 80) = std::nan("");  // target of day 75 needs close(80)
    const TrainingWindow w = assemble_window(p, 80, 1);
    CHECK(w.size() == 5);
  }
  SUBCASE("insufficient history names the first feasible date") {
    try {
      assemble_window(p, 70, 10);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find(p.calendar.date(first_feasible_as_of(10))) != std::string::npos);
    }
  }
}

TEST_CASE("assemble_window: store and direct paths agree; no lookahead") {
  const MarketPanel p = test::random_panel(8, 100, 12);
  const FeatureStore store(p);
  const TrainingWindow a = assemble_window(store, 95, 20);
  const TrainingWindow b = assemble_window(p, 95, 20);
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  CHECK(a.stocks == b.stocks);

  MarketPanel q = p;
  q.close.col(96) *= 1.1;
  q.open.col(96) *= 0.9;
  const TrainingWindow c = assemble_window(q, 95, 20);
  CHECK(c.features == a.features);
  CHECK(c.targets == a.targets);
}

TEST_CASE("scaled targets live in (0, 1] per day") {
  const MarketPanel p = test::random_panel(10, 90, 8);
  const TrainingWindow w = assemble_window(p, 85, 5);
  for (std::size_t d = 76; d <= 80; ++d) {
    double mx = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w.days[i] == d) mx = std::max(mx, w.targets(static_cast<Eigen::Index>(i)));
    CHECK(mx == 1.0);
  }
  CHECK((w.targets.array() > 0).all());
}

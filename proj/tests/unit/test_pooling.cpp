#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "hybridest/errors.hpp"
#include "hybridest/pooling.hpp"
#include "hybridest/stats.hpp"
#include "oracles/rubin.hpp"

using namespace hybridest;

TEST_CASE("identical estimates have no between variance") {
  const double nu = 200;
  const auto p = pool({{1.0, 0.5, nu}, {1.0, 0.5, nu}, {1.0, 0.5, nu}});
  CHECK(p.q_bar == 1.0);
  CHECK(p.between == 0.0);
  CHECK(p.total == doctest::Approx(0.25).epsilon(1e-15));
  // Barnard-Rubin at lambda = 0 is the observed-data df of the complete model.
  CHECK(p.df == doctest::Approx(nu * (nu + 1) / (nu + 3)));
  const double half = stats::t_quantile(p.df, 0.975) * 0.5;
  CHECK(p.ci_low == doctest::Approx(1.0 - half));
  CHECK(p.ci_high == doctest::Approx(1.0 + half));
}

TEST_CASE("hand arithmetic for two imputations") {
  const auto p = pool({{0.0, 1.0, 100}, {2.0, 1.0, 100}});
  CHECK(p.q_bar == 1.0);
  CHECK(p.within == 1.0);
  CHECK(p.between == 2.0);
  CHECK(p.total == 4.0);
}

TEST_CASE("matches the straight-line reference on random inputs") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 2 + static_cast<int>(u(gen) * 30);
    const double nu = 5 + u(gen) * 500;
    std::vector<CompleteDataEstimate> est;
    std::vector<double> q, se;
    for (int i = 0; i < m; ++i) {
      q.push_back(-1 + 2 * u(gen));
      se.push_back(0.05 + u(gen));
      est.push_back({q.back(), se.back(), nu});
    }
    const auto p = pool(est, 0.05);
    const auto r = oracle::rubin(q, se, nu, 0.05);
    CHECK(std::fabs(p.q_bar - r.q_bar) <= 1e-12);
    CHECK(std::fabs(p.within - r.w) <= 1e-12);
    CHECK(std::fabs(p.between - r.b) <= 1e-12);
    CHECK(std::fabs(p.total - r.t) <= 1e-12);
    CHECK(std::fabs(p.df - r.df) <= 1e-12 * std::max(1.0, r.df));
    CHECK(std::fabs(p.ci_low - r.lo) <= 1e-12);
    CHECK(std::fabs(p.ci_high - r.hi) <= 1e-12);
    CHECK(p.total >= p.within);
    CHECK(p.between >= 0.0);
    CHECK(p.df > 0.0);
  }
}

TEST_CASE("monotone in each standard error and scale equivariant") {
  std::vector<CompleteDataEstimate> est = {{0.2, 0.3, 80}, {0.5, 0.4, 80}, {0.1, 0.2, 80}};
  const auto base = pool(est);
  for (std::size_t i = 0; i < est.size(); ++i) {
    auto bigger = est;
    bigger[i].se *= 1.5;
    CHECK(pool(bigger).total >= base.total);
  }
  const double c = -3.0;
  auto scaled = est;
  for (auto& e : scaled) {
    e.value *= c;
    e.se *= std::fabs(c);
  }
  const auto p = pool(scaled);
  CHECK(p.q_bar == doctest::Approx(c * base.q_bar).epsilon(1e-14));
  CHECK(p.total == doctest::Approx(c * c * base.total).epsilon(1e-14));
}

TEST_CASE("df tends to the lambda = 0 limit as B shrinks") {
  const double nu = 150;
  const double limit = nu * (nu + 1) / (nu + 3);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double spread : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    const auto p = pool({{-spread, 1.0, nu}, {spread, 1.0, nu}, {0.0, 1.0, nu}});
    const double gap = std::fabs(p.df - limit);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 1e-6);
  CHECK(barnard_rubin_df(5, 0.0, std::numeric_limits<double>::infinity()) == std::numeric_limits<double>::infinity());
  CHECK(barnard_rubin_df(5, 0.5, std::numeric_limits<double>::infinity()) == doctest::Approx(16.0));
}

TEST_CASE("one-sided p-value direction") {
  const std::vector<CompleteDataEstimate> est = {{-0.5, 0.1, 300}, {-0.45, 0.1, 300}};
  const auto lower = pool(est, 0.05, {0.0, true});
  const auto upper = pool(est, 0.05, {0.0, false});
  CHECK(lower.p_value < 0.01);
  CHECK(lower.p_value + upper.p_value == doctest::Approx(1.0));
  CHECK(pool(est, 0.05, {0.4, true}).p_value < lower.p_value);
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(pool({{1.0, 0.5, 10}}), InputError);
  CHECK_THROWS_AS(pool({{1.0, 0.5, 10}, {1.0, 0.0, 10}}), InputError);
  CHECK_THROWS_AS(pool({{1.0, 0.5, 10}, {1.0, 0.5, 20}}), InputError);
  CHECK_THROWS_AS(pool({{1.0, 0.5, 10}, {1.0, 0.5, 10}}, 1.5), InputError);
}

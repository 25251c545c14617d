#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "grpolab/advantage.hpp"
#include "oracles.hpp"

using namespace grpolab;

TEST_CASE("group_normalize examples") {
  SUBCASE("positive-negative pair") {
    const std::vector<int> r = {1, 0};
    const auto a = group_normalize(r, 0.0);
    CHECK(a == std::vector<double>{1.0, -1.0});
  }
  SUBCASE("uniform group gives exact zeros") {
    const std::vector<int> ones = {1, 1, 1, 1};
    const std::vector<int> zeros = {0, 0, 0};
    CHECK(group_normalize(ones) == std::vector<double>(4, 0.0));
    CHECK(group_normalize(zeros) == std::vector<double>(3, 0.0));
  }
  SUBCASE("p-hat = 1/4 closed form") {
    const std::vector<int> r = {1, 0, 0, 1, 0, 0, 0, 0};
    const auto a = group_normalize(r, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double expected = r[i] == 1 ? std::sqrt(3.0) : -1.0 / std::sqrt(3.0);
      CHECK(a[i] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("group_normalize matches the textbook formula") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const std::size_t g = 2 + rng.index(30);
    std::vector<int> r(g);
    for (int& x : r) x = rng.bernoulli(0.3) ? 1 : 0;
    for (double eps : {0.0, 1e-6, 0.1}) {
      const auto a = group_normalize(r, eps);
      const auto b = oracle::textbook_advantages(r, eps);
      for (std::size_t i = 0; i < g; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("advantage structure and closed form") {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const std::size_t g = 2 + rng.index(40);
    std::vector<int> r(g);
    for (int& x : r) x = rng.bernoulli(0.5) ? 1 : 0;
    const double eps = 1e-3;
    const auto a = group_normalize(r, eps);
    std::size_t pos = 0;
    for (int x : r) pos += static_cast<std::size_t>(x);
    if (pos == 0 || pos == g) {
      for (double x : a) CHECK(x == 0.0);
      continue;
    }
    const double phat = static_cast<double>(pos) / static_cast<double>(g);
    const double sigma = std::sqrt(phat * (1.0 - phat));
    const double shrink = sigma / (sigma + eps);
    double sum = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
      sum += a[i];
      if (r[i] == 1) {
        CHECK(a[i] > 0.0);
        CHECK(a[i] == doctest::Approx(std::sqrt((1.0 - phat) / phat) * shrink).epsilon(1e-12));
      } else {
        CHECK(a[i] < 0.0);
        CHECK(a[i] == doctest::Approx(-std::sqrt(phat / (1.0 - phat)) * shrink).epsilon(1e-12));
      }
    }
    CHECK(std::abs(sum) <= 1e-10);
    const auto [ap, an] = mixed_group_advantages(phat, eps);
    CHECK(ap == doctest::Approx(std::sqrt((1.0 - phat) / phat) * shrink).epsilon(1e-13));
    CHECK(an == doctest::Approx(-std::sqrt(phat / (1.0 - phat)) * shrink).epsilon(1e-13));
  }
}

TEST_CASE("group_normalize argument errors") {
  const std::vector<int> one = {1};
  const std::vector<int> pair = {1, 0};
  const std::vector<int> bad = {1, 2};
  CHECK_THROWS_AS(group_normalize(one), std::invalid_argument);
  CHECK_THROWS_AS(group_normalize(pair, -1e-6), std::invalid_argument);
  CHECK_THROWS_AS(group_normalize(bad), std::invalid_argument);
}

TEST_CASE("pair_advantage") {
  CHECK(pair_advantage(1, 0) == std::pair{1, -1});
  CHECK(pair_advantage(0, 1) == std::pair{-1, 1});
  CHECK(pair_advantage(0, 0) == std::pair{0, 0});
  CHECK(pair_advantage(1, 1) == std::pair{0, 0});
  for (int r1 : {0, 1}) {
    for (int r2 : {0, 1}) {
      const std::vector<int> r = {r1, r2};
      const auto a = group_normalize(r, 1e-12);
      const auto [p1, p2] = pair_advantage(r1, r2);
      CHECK(std::abs(a[0] - p1) <= 1e-11);
      CHECK(std::abs(a[1] - p2) <= 1e-11);
      const double eps = 1e-4;
      const auto b = group_normalize(r, eps);
      CHECK(std::abs(b[0] - p1) <= 2.0 * eps / 0.5);
    }
  }
}

TEST_CASE("theoretical limits") {
  CHECK(theoretical_advantage_limit(1, 0.5, LimitMode::large_group) == 1.0);
  CHECK(theoretical_advantage_limit(1, 0.5, LimitMode::pairwise) == 0.5);
  CHECK(theoretical_advantage_limit(0, 0.25, LimitMode::large_group) ==
        doctest::Approx(-0.25 / std::sqrt(0.1875)).epsilon(1e-15));
  CHECK(theoretical_advantage_limit(0, 0.25, LimitMode::large_group) ==
        doctest::Approx(-0.5774).epsilon(1e-4));
  CHECK(theoretical_advantage_limit(0, 0.25, LimitMode::pairwise) == -0.25);
  CHECK_THROWS_AS(theoretical_advantage_limit(1, 0.0, LimitMode::pairwise), std::invalid_argument);
  CHECK_THROWS_AS(theoretical_advantage_limit(1, 1.0, LimitMode::large_group),
                  std::invalid_argument);
  CHECK_THROWS_AS(theoretical_advantage_limit(2, 0.5, LimitMode::large_group),
                  std::invalid_argument);
}

TEST_CASE("scaling identity between the two limits") {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double p = 0.001 + 0.998 * rng.uniform();
    for (int x : {0, 1}) {
      const double large = theoretical_advantage_limit(x, p, LimitMode::large_group);
      const double pair = theoretical_advantage_limit(x, p, LimitMode::pairwise);
      CHECK(large == doctest::Approx(pair / std::sqrt(p * (1.0 - p))).epsilon(1e-14));
    }
  }
}

TEST_CASE("rollout group bookkeeping") {
  RolloutGroup g;
  g.trajectories.resize(4);
  g.rewards = {1, 0, 0, 1};
  CHECK(g.num_correct() == 2);
  CHECK(g.success_rate() == 0.5);
  CHECK_FALSE(g.is_degenerate());
  g.rewards = {0, 0, 0, 0};
  CHECK(g.is_degenerate());
  g.rewards = {0, 0, 0};
  CHECK_THROWS_AS(check_group(g), std::invalid_argument);
}

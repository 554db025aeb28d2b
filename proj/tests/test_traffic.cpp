#include <doctest.h>

#include <cmath>
#include <random>

#include "nocperf/error.hpp"
#include "nocperf/traffic.hpp"

using namespace nocperf;
using doctest::Approx;

TEST_CASE("scv_from_burst examples") {
  CHECK(scv_from_burst(0.5, 0.0) == Approx(0.5));
  CHECK(scv_from_burst(0.2, 0.5) == Approx(2.8));
  CHECK(scv_from_burst(0.1, 0.6) == Approx(3.9));
  CHECK_THROWS_AS(scv_from_burst(0.2, 1.0), DomainError);
  CHECK_THROWS_AS(scv_from_burst(0.0, 0.2), DomainError);
  CHECK_THROWS_AS(scv_from_burst(1.2, 0.2), DomainError);
}

TEST_CASE("burst_from_scv examples and floor") {
  CHECK(burst_from_scv(0.5, 0.5) == Approx(0.0));
  CHECK(burst_from_scv(0.2, 2.8) == Approx(0.5));
  CHECK(burst_from_scv(0.1, 3.9) == Approx(0.6));
  CHECK_THROWS_AS(burst_from_scv(0.3, 0.69), DomainError);
}

TEST_CASE("burst_factor examples") {
  CHECK(burst_factor(0.4, scv_from_burst(0.4, 0.0)) == Approx(0.0));
  CHECK(burst_factor(0.3, 1.2) == Approx(0.25));
  CHECK(burst_factor(0.2, 2.8) == Approx(1.0));
  CHECK(burst_factor(MomentPair{0.0, 5.0}) == 0.0);
}

TEST_CASE("moment round trip over a grid") {
  for (int i = 1; i <= 20; ++i)
    for (int j = 0; j < 15; ++j) {
      const double lam = 0.05 * i, p = 0.07 * j;
      const double scv = scv_from_burst(lam, p);
      CHECK(scv >= 1.0 - lam - 1e-15);
      CHECK(std::abs(burst_from_scv(lam, scv) - p) <= 1e-12);
      CHECK(std::abs(burst_factor(lam, scv) - p / (1.0 - p)) <= 1e-12);
    }
}

TEST_CASE("GGeoProcess derives its scv") {
  const GGeoProcess g(0.3, 0.0);
  CHECK(g.scv() == Approx(0.7));
  const GGeoProcess b(0.2, 0.5);
  CHECK(b.scv() == Approx(2.8));
  CHECK(b.slot_prob() == Approx(0.1));
  CHECK_THROWS_AS(GGeoProcess(0.0, 0.1), DomainError);
}

TEST_CASE("split_stream") {
  const MomentPair in{0.4, 2.0};
  CHECK(split_stream(in, 1.0) == in);
  CHECK(split_stream(in, 0.0).is_null());
  const auto h = split_stream(in, 0.5);
  CHECK(h.rate == Approx(0.2));
  CHECK(h.scv == Approx(1.5));
  CHECK_THROWS_AS(split_stream(in, 1.1), DomainError);

  SUBCASE("consecutive splits compose") {
    for (double q : {0.1, 0.4, 0.9})
      for (double r : {0.2, 0.5, 1.0}) {
        const auto two = split_stream(split_stream(in, q), r);
        const auto one = split_stream(in, q * r);
        CHECK(two.rate == Approx(one.rate));
        CHECK(two.scv == Approx(one.scv));
      }
  }
}

TEST_CASE("split rule matches a thinned sampled stream") {
  const double rate = 0.4, scv = 2.0;
  GGeoSampler s(GGeoProcess(rate, burst_from_scv(rate, scv)), 17);
  std::mt19937_64 coin(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint64_t> kept;
  std::uint64_t t = 0, last = 0;
  bool first = true;
  for (int i = 0; i < 600000; ++i) {
    t += s.next_gap();
    if (u(coin) < 0.5) {
      if (!first)
        kept.push_back(t - last);
      first = false;
      last = t;
    }
  }
  const auto m = gap_moments(kept);
  CHECK(1.0 / m.mean == Approx(0.2).epsilon(0.01));
  CHECK(m.scv == Approx(1.5).epsilon(0.03));
}

TEST_CASE("departure_scv limits") {
  CHECK(departure_scv(0.0, 2.8, 0.0) == Approx(2.8));
  CHECK(departure_scv(0.5, 2.8, 0.0) == Approx(2.1));
  CHECK(departure_scv(0.999999, 2.8, 0.3) == Approx(0.3).epsilon(1e-4));
  CHECK_THROWS_AS(departure_scv(1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("sampler") {
  SUBCASE("saturated Bernoulli gaps are all 1") {
    for (auto g : sample_interarrivals(GGeoProcess(1.0, 0.0), 5, 1000))
      CHECK(g == 1);
  }
  SUBCASE("deterministic per seed") {
    const GGeoProcess p(0.3, 0.4);
    CHECK(sample_interarrivals(p, 8, 5000) == sample_interarrivals(p, 8, 5000));
    CHECK(sample_interarrivals(p, 8, 5000) != sample_interarrivals(p, 9, 5000));
  }
  SUBCASE("mean gap at rate 0.25") {
    const auto m = gap_moments(sample_interarrivals(GGeoProcess(0.25, 0.0), 3, 1000000));
    CHECK(m.mean == Approx(4.0).epsilon(0.01));
  }
  SUBCASE("scv at rate 0.2, p_b 0.5") {
    const auto m = gap_moments(sample_interarrivals(GGeoProcess(0.2, 0.5), 4, 1000000));
    CHECK(m.scv == Approx(2.8).epsilon(0.03));
  }
  CHECK_THROWS_AS(sample_interarrivals(GGeoProcess(0.2, 0.1), 1, 0), DomainError);
}

#include <doctest.h>

#include <deque>
#include <random>
#include <sstream>

#include "nocperf/error.hpp"
#include "nocperf/traceburst.hpp"
#include "nocperf/traffic.hpp"

using namespace nocperf;
using doctest::Approx;

namespace {

std::vector<TraceEvent> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_trace(in, "t.csv");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Flit-by-flit reference for the virtual queue: per-flit departure times,
// population counted at every cycle after that cycle's arrivals.
double reference_occupancy(const std::vector<std::uint64_t>& arr, std::uint64_t start,
                           std::uint64_t cycles, int T) {
  std::vector<std::uint64_t> in_window;
  for (auto a : arr)
    if (a >= start && a < start + cycles)
      in_window.push_back(a);
  std::vector<std::uint64_t> leave;
  std::uint64_t free_at = 0;
  for (auto a : in_window) {
    const std::uint64_t begin = std::max(a, free_at);
    free_at = begin + static_cast<std::uint64_t>(T);
    leave.push_back(free_at);
  }
  double sum = 0;
  for (std::uint64_t t = start; t < start + cycles; ++t)
    for (std::size_t i = 0; i < in_window.size(); ++i)
      sum += in_window[i] <= t && t < leave[i];
  return sum / static_cast<double>(cycles);
}

std::vector<TraceEvent> ggeo_trace(int sources, double rate, double pb, std::size_t count,
                                   std::uint64_t seed) {
  std::vector<TraceEvent> events;
  for (int s = 0; s < sources; ++s) {
    std::uint64_t t = 0;
    for (auto g : sample_interarrivals(GGeoProcess(rate, pb), seed + s, count)) {
      t += g;
      events.push_back({t, s, sources});
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.cycle < b.cycle; });
  return events;
}

} // namespace

TEST_CASE("parse_trace") {
  const auto ev = parse("# injected flits\ncycle,src,dst\n0,1,2\n\n 3 , 2 , 0\n3,1,0\r\n");
  REQUIRE(ev.size() == 3);
  CHECK(ev[1] == TraceEvent{3, 2, 0});
  CHECK(parse("").empty());
  CHECK(parse_error("0,1\n") == "t.csv:1: expected three fields cycle,src,dst");
  CHECK(parse_error("0,1,2\n5,x,2\n").rfind("t.csv:2:", 0) == 0);
  CHECK(parse_error("0,1,-2\n").find("t.csv:1:") == 0);
  CHECK(parse_error("4,1,1\n").find("source equals destination") != std::string::npos);
  CHECK(parse_error("4,1,2\n3,1,2\n").find("t.csv:2: events are not sorted") == 0);
  CHECK(parse_error("0,1,2,3\n") != "");
  CHECK_THROWS_AS(load_trace("/nonexistent/trace.csv"), ConfigError);
}

TEST_CASE("estimate_rate") {
  const auto ev = parse("0,0,1\n1,0,2\n2,1,0\n9,0,1\n10,1,2\n");
  const auto r = estimate_rate(ev, 10);
  // Two windows times two sources.
  REQUIRE(r.size() == 4);
  CHECK(r[0].key.src == 0);
  CHECK(r[0].rate == Approx(0.3));
  CHECK(r[1].rate == Approx(0.1));
  CHECK(r[2].rate == 0.0);
  CHECK(r[3].rate == Approx(0.1));
  const auto pf = estimate_rate(ev, 10, true);
  CHECK(pf.size() == 2 * 4);
  CHECK_THROWS_AS(estimate_rate(ev, 0), DomainError);
}

TEST_CASE("virtual queue occupancy") {
  CHECK(virtual_queue_occupancy({0, 0, 0}, 0, 10, 1) == Approx(0.6));
  CHECK(virtual_queue_occupancy({0, 0, 0}, 0, 10, 2) == Approx(1.2));
  CHECK(virtual_queue_occupancy({}, 0, 10, 1) == 0.0);
  // Work left over from the previous window is dropped.
  CHECK(virtual_queue_occupancy({8, 8, 8}, 10, 10, 1) == 0.0);

  std::mt19937_64 rng(5);
  for (int T : {1, 2, 3})
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint64_t> arr;
      std::uint64_t t = 0;
      for (int i = 0; i < 60; ++i) {
        t += rng() % 4 == 0 ? 0 : rng() % (3 * T + 1);
        arr.push_back(t);
      }
      const std::uint64_t start = rng() % 40, len = 20 + rng() % 120;
      CHECK(virtual_queue_occupancy(arr, start, len, T) ==
            Approx(reference_occupancy(arr, start, len, T)));
    }
}

TEST_CASE("burst probability round trip") {
  for (double rate : {0.1, 0.3, 0.5})
    for (double pb : {0.0, 0.2, 0.5}) {
      const auto ev = ggeo_trace(1, rate, pb, static_cast<std::size_t>(rate * 1e6), 3);
      BurstOptions o;
      o.window_len = 1000000;
      const auto est = estimate_burstiness(ev, o);
      REQUIRE(!est.empty());
      CHECK(est[0].rate == Approx(rate).epsilon(0.02));
      CHECK(est[0].burst_prob == Approx(pb).scale(1).epsilon(0.02));
      CHECK(est[0].arrival_scv == Approx(scv_from_burst(rate, pb)).epsilon(0.06));
    }
}

TEST_CASE("estimate grows with burstiness") {
  double prev = -1.0;
  for (double pb : {0.0, 0.15, 0.3, 0.45, 0.6}) {
    BurstOptions o;
    o.window_len = 500000;
    const auto est = estimate_burstiness(ggeo_trace(1, 0.3, pb, 150000, 9), o);
    CHECK(est[0].burst_prob > prev);
    prev = est[0].burst_prob;
  }
}

TEST_CASE("windows and keys") {
  const auto ev = ggeo_trace(3, 0.2, 0.4, 40000, 21);
  BurstOptions o;
  o.window_len = 50000;
  const auto est = estimate_burstiness(ev, o);
  const auto rates = estimate_rate(ev, o.window_len);
  REQUIRE(est.size() == rates.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    CHECK(est[i].window == rates[i].window);
    CHECK(est[i].key.src == rates[i].key.src);
    CHECK(est[i].rate == rates[i].rate);
    CHECK(est[i].key.dst == -1);
  }
  o.per_flow = true;
  for (const auto& e : estimate_burstiness(ev, o))
    CHECK(e.key.dst >= 0);
}

TEST_CASE("flags") {
  BurstOptions o;
  o.window_len = 10;
  o.service_time = 2;
  // Source 0 idles in window 1; source 1 is periodic, smoother than any
  // Bernoulli stream of the same rate.
  const auto ev = parse("0,0,1\n0,0,1\n2,1,0\n4,1,0\n6,1,0\n8,1,0\n12,1,0\n");
  auto est = estimate_burstiness(ev, o);
  REQUIRE(est.size() == 4);
  CHECK(est[0].flag == EstimateFlag::ok);
  CHECK(est[1].flag == EstimateFlag::below_bernoulli);
  CHECK(est[1].burst_prob == 0.0);
  CHECK(est[2].flag == EstimateFlag::no_events);
  o.service_time = 3;
  est = estimate_burstiness(ev, o);
  CHECK(est[1].flag == EstimateFlag::unstable);
  const std::string js = estimates_to_json(est);
  CHECK(js.find("\"flag\": \"unstable\"") != std::string::npos);
  o.service_time = 0;
  CHECK_THROWS_AS(estimate_burstiness(ev, o), DomainError);
}

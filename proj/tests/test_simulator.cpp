#include <doctest.h>

#include <sstream>

#include "nocperf/analytic.hpp"
#include "nocperf/canonical.hpp"
#include "nocperf/error.hpp"
#include "nocperf/simulator.hpp"
#include "nocperf/topology.hpp"
#include "nocperf/traceburst.hpp"

using namespace nocperf;
using doctest::Approx;

namespace {

SimModel single_queue(double rate, double pb, int service_time = 1) {
  SimModel m;
  m.servers = {{service_time, "S"}};
  m.queues = {{0, "q"}};
  m.flows = {{{{0, 0}}, 0, 1}};
  m.sources = {{GGeoProcess(rate, pb), {0}, {1.0}}};
  return m;
}

SimOptions short_run(std::uint64_t seed = 7) {
  SimOptions o;
  o.warmup = 20000;
  o.measure = 400000;
  o.seed = seed;
  return o;
}

double pb_for_scv(double rate, double scv) { return burst_from_scv(rate, scv); }

} // namespace

TEST_CASE("same seed, same report") {
  const auto m = build_sim_model(Topology::ring(6), [] {
    TrafficPattern p;
    p.rate = 0.3;
    p.burst_prob = 0.4;
    return p;
  }(), 1, 1);
  auto o = short_run(11);
  o.measure = 100000;
  std::ostringstream t1, t2;
  o.trace = &t1;
  const auto a = run_simulation(m, o);
  o.trace = &t2;
  const auto b = run_simulation(m, o);
  CHECK(a.mean_latency() == b.mean_latency());
  CHECK(t1.str() == t2.str());
  CHECK(t1.str().rfind("cycle,src,dst\n", 0) == 0);
  o.seed = 12;
  o.trace = nullptr;
  CHECK(run_simulation(m, o).mean_latency() != a.mean_latency());
}

TEST_CASE("flit conservation and arbitration audit") {
  TrafficPattern p;
  p.rate = 0.4;
  p.burst_prob = 0.5;
  const auto m = build_sim_model(Topology::mesh(3, 3), p, 1, 1);
  auto o = short_run(3);
  o.measure = 100000;
  o.audit = true;
  const auto r = run_simulation(m, o);
  CHECK(r.priority_violations == 0);
  CHECK(r.idle_violations == 0);
  CHECK_FALSE(r.saturated);
  for (std::size_t f = 0; f < r.flows.size(); ++f) {
    const auto& fs = r.flows[f];
    CHECK(fs.injected == fs.delivered + fs.in_flight);
    CHECK(fs.measured > 0);
    CHECK(fs.min_latency >= 2 * m.flows[f].hops.size());
    CHECK(fs.mean_latency >= static_cast<double>(fs.min_latency));
    CHECK(fs.p50 <= fs.p95);
    CHECK(fs.p95 <= fs.p99);
  }
}

TEST_CASE("Bernoulli arrivals into a unit server never queue") {
  const auto r = run_simulation(single_queue(0.5, 0.0), short_run());
  CHECK(r.queues[0].mean_wait < 0.01);
  CHECK(r.flows[0].mean_latency == Approx(2.0).epsilon(0.01));
}

TEST_CASE("utilization, Little and arrival moments") {
  for (double rate : {0.2, 0.5, 0.7})
    for (double pb : {0.0, 0.4}) {
      const auto r = run_simulation(single_queue(rate, pb), short_run());
      const auto& q = r.queues[0];
      CHECK(r.servers[0].utilization == Approx(rate).epsilon(0.02));
      CHECK(q.busy_fraction == Approx(rate).epsilon(0.02));
      CHECK(q.arrivals.rate == Approx(rate).epsilon(0.02));
      CHECK(q.arrivals.scv == Approx(scv_from_burst(rate, pb)).epsilon(0.05));
      // L = lambda (W + T)
      CHECK(q.mean_occupancy == Approx(q.arrivals.rate * (q.mean_wait + 1.0)).epsilon(0.03));
    }
}

TEST_CASE("departure scv and occupancy closed forms") {
  SUBCASE("departure scv at rho 0.5, C_a^2 2.8") {
    const double expect = departure_scv(0.5, 2.8, 0.0);
    CHECK(expect == Approx(2.1));
    auto o = short_run();
    o.measure = 1000000;
    const auto r = run_simulation(single_queue(0.5, pb_for_scv(0.5, 2.8)), o);
    CHECK(r.queues[0].departures.scv == Approx(expect).epsilon(0.2));
  }
  SUBCASE("occupancy at rho 0.6, C_a^2 2.8") {
    const double expect = ggeo_g1_occupancy(0.6, 2.8, 0.0);
    CHECK(expect == Approx(2.4));
    auto o = short_run();
    o.measure = 1000000;
    const auto r = run_simulation(single_queue(0.6, pb_for_scv(0.6, 2.8)), o);
    CHECK(r.queues[0].mean_occupancy == Approx(expect).epsilon(0.1));
  }
}

TEST_CASE("priority order and canonical fixtures") {
  const CanonicalParams p{{{0.3, 0.4, 0}, {0.3, 0.4, 1}}, 1};
  auto o = short_run();
  o.audit = true;
  o.conditional_occupancy = true;
  const auto r = run_canonical(CanonicalStructure::basic, p, o);
  CHECK(r.priority_violations == 0);
  CHECK(r.idle_violations == 0);
  CHECK(r.queues[0].mean_wait < r.queues[1].mean_wait);
  // Total work is order independent: the rate-weighted mean matches FIFO.
  auto merged = single_queue(0.3, 0.4);
  merged.sources.push_back(merged.sources[0]);
  const auto fifo = run_simulation(merged, o);
  const double mixed = 0.5 * (r.queues[0].mean_wait + r.queues[1].mean_wait);
  CHECK(mixed == Approx(fifo.queues[0].mean_wait).epsilon(0.05));

  const auto n = measure_conditional_occupancy(r, 0);
  REQUIRE(n.size() == 2);
  for (const auto& row : n)
    for (double v : row)
      CHECK(v >= 0.0);
  // Summing over the class in service gives the population while busy.
  CHECK(n[1][0] + n[1][1] <= r.queues[1].mean_occupancy + 1e-9);

  SUBCASE("zero-rate classes never inject") {
    const CanonicalParams z{{{0.3, 0.2, 0}, {0.2, 0.2, 0}, {0.0, 0.2, 1}}, 1};
    const auto rz = run_canonical(CanonicalStructure::contention_high, z, short_run());
    CHECK(rz.flows[2].injected == 0);
    CHECK(rz.flows[0].injected > 0);
  }
}

TEST_CASE("service time above one") {
  const auto r = run_simulation(single_queue(0.2, 0.0, 3), short_run());
  CHECK(r.servers[0].utilization == Approx(0.6).epsilon(0.02));
  CHECK(r.flows[0].min_latency == 4);
}

TEST_CASE("empty and invalid models") {
  SimModel m = single_queue(0.3, 0.0);
  m.sources.clear();
  const auto r = run_simulation(m, short_run());
  CHECK(r.flows[0].injected == 0);
  CHECK(r.mean_latency() == 0.0);

  SimModel bad = single_queue(0.3, 0.0);
  bad.flows[0].hops[0].server = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("trace dump feeds the estimator") {
  auto m = single_queue(0.3, 0.5);
  auto o = short_run(5);
  std::ostringstream trace;
  o.trace = &trace;
  const auto r = run_simulation(m, o);
  std::istringstream in(trace.str());
  const auto events = parse_trace(in);
  CHECK(events.size() >= r.flows[0].injected);
  BurstOptions bo;
  bo.window_len = 400000;
  const auto est = estimate_burstiness(events, bo);
  REQUIRE(!est.empty());
  CHECK(est[0].rate == Approx(0.3).epsilon(0.03));
  CHECK(est[0].burst_prob == Approx(0.5).epsilon(0.05));
}

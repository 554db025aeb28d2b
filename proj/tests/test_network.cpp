#include <doctest.h>

#include <chrono>
#include <cmath>
#include <set>

#include "nocperf/analytic.hpp"
#include "nocperf/canonical.hpp"
#include "nocperf/error.hpp"
#include "nocperf/network.hpp"
#include "nocperf/topology.hpp"

using namespace nocperf;
using doctest::Approx;

namespace {

TrafficPattern uniform(double rate, double pb) {
  TrafficPattern p;
  p.rate = rate;
  p.burst_prob = pb;
  return p;
}

TrafficPattern flows(std::vector<FlowSpec> f) {
  TrafficPattern p;
  p.kind = TrafficPattern::Kind::explicit_flows;
  p.flows = std::move(f);
  return p;
}

} // namespace

TEST_CASE("routes") {
  const auto mesh = Topology::mesh(4, 4);
  SUBCASE("same row is a pure X leg") {
    const auto r = route(mesh, mesh.node_at(0, 0), mesh.node_at(0, 3));
    CHECK(link_hops(r) == 3);
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
      CHECK(r[i].out_port == kEast);
  }
  SUBCASE("Y first, then X") {
    const auto r = route(mesh, mesh.node_at(0, 0), mesh.node_at(2, 3));
    REQUIRE(r.size() == 6);
    CHECK(r[0].in_port == kInjectPort);
    CHECK(r[0].out_port == kSouth);
    CHECK(r[1].out_port == kSouth);
    CHECK(r[2].out_port == kEast);
    CHECK(r[4].out_port == kEast);
    CHECK(r[5].out_port == kEjectPort);
    CHECK(r[5].node == mesh.node_at(2, 3));
  }
  SUBCASE("ring tie goes clockwise") {
    const auto ring = Topology::ring(6);
    const auto r = route(ring, 1, 4);
    CHECK(link_hops(r) == 3);
    CHECK(r[1].node == 2);
    const auto back = route(ring, 4, 0);
    CHECK(link_hops(back) == 2);
    CHECK(back[1].node == 5);
    const auto ccw = route(ring, 0, 5);
    CHECK(link_hops(ccw) == 1);
    CHECK(ccw[0].out_port == kRingCcw);
  }
}

TEST_CASE("build_queue_graph") {
  const auto ring = Topology::ring(6);
  SUBCASE("single flow is a chain of single-class queues") {
    const auto g = build_queue_graph(ring, flows({{0, 3, GGeoProcess(0.2, 0.3)}}));
    int used = 0;
    for (const auto& q : g.classes)
      if (!q.empty()) {
        CHECK(q.size() == 1);
        ++used;
      }
    CHECK(used == 4);
  }
  SUBCASE("through traffic outranks injection where flows merge") {
    auto g = build_queue_graph(
        ring, flows({{0, 2, GGeoProcess(0.2, 0.3)}, {1, 2, GGeoProcess(0.2, 0.3)}}));
    classify_structures(g);
    const int server = ring.server_id(1, kRingCw);
    int seen = 0;
    for (const auto& x : g.interactions)
      if (x.server == server) {
        ++seen;
        CHECK(x.high_queue == ring.queue_id(1, kRingCw));
        CHECK(x.low_queue == ring.queue_id(1, kInjectPort));
        CHECK_FALSE(x.equal_rank);
        CHECK(x.kind == InteractionKind::basic);
      }
    CHECK(seen == 1);
  }
  SUBCASE("mesh: link queues outrank injection queues everywhere") {
    const auto mesh = Topology::mesh(4, 4);
    auto g = build_queue_graph(mesh, uniform(0.3, 0.2));
    classify_structures(g);
    CHECK(!g.interactions.empty());
    for (std::size_t q = 0; q < g.model.queues.size(); ++q)
      CHECK(g.model.queues[q].rank == (static_cast<int>(q) % mesh.ports() == kInjectPort ? 1 : 0));
    std::set<InteractionKind> kinds;
    for (const auto& x : g.interactions) {
      kinds.insert(x.kind);
      if (!x.equal_rank)
        CHECK(x.low_queue % mesh.ports() == kInjectPort);
    }
    CHECK(kinds.count(InteractionKind::contention_both) == 1);
  }
  SUBCASE("saturated queue is named") {
    try {
      build_queue_graph(ring, flows({{0, 3, GGeoProcess(0.6, 0.0)}, {0, 2, GGeoProcess(0.5, 0.0)}}));
      FAIL("expected instability");
    } catch (const InstabilityError& e) {
      CHECK(e.where() == "r0.in.inj");
    }
  }
}

TEST_CASE("classify_structures on the canonical layouts") {
  auto kind_of = [](CanonicalStructure s) {
    CanonicalParams p{{{0.2, 0.2, 0}, {0.2, 0.2, 1}, {0.2, 0.2, 2}}, 1};
    if (s == CanonicalStructure::basic)
      p.classes.pop_back();
    auto g = build_queue_graph(build_canonical(s, p));
    classify_structures(g);
    std::set<InteractionKind> k;
    for (const auto& x : g.interactions)
      k.insert(x.kind);
    return k;
  };
  CHECK(kind_of(CanonicalStructure::basic) == std::set{InteractionKind::basic});
  CHECK(kind_of(CanonicalStructure::contention_low) == std::set{InteractionKind::contention_low});
  CHECK(kind_of(CanonicalStructure::contention_high) ==
        std::set{InteractionKind::contention_high});
}

TEST_CASE("network solve agrees with the canonical decompositions") {
  SUBCASE("basic") {
    const CanonicalParams p{{{0.25, 0.4, 0}, {0.2, 0.4, 1}}, 1};
    const auto s = solve_network(build_queue_graph(build_canonical(CanonicalStructure::basic, p)));
    const auto d = decompose_basic_priority(
        {{{"1", {0.25, scv_from_burst(0.25, 0.4)}, 1, 0.0, 0, -1},
          {"2", {0.2, scv_from_burst(0.2, 0.4)}, 1, 0.0, 1, -1}}});
    CHECK(s.queues[0].waiting == Approx(d.classes[0].waiting).epsilon(1e-5));
    CHECK(s.queues[1].waiting == Approx(d.classes[1].waiting).epsilon(1e-5));
  }
  SUBCASE("contention at high priority") {
    const CanonicalParams p{{{0.2, 0.4, 0}, {0.2, 0.4, 0}, {0.2, 0.4, 1}}, 1};
    const auto s =
        solve_network(build_queue_graph(build_canonical(CanonicalStructure::contention_high, p)));
    const MomentPair parent{0.4, scv_from_burst(0.4, 0.4)};
    const auto d = decompose_contention_high({"1", split_stream(parent, 0.5), 1, 0.0, 0, 0},
                                             {"2", split_stream(parent, 0.5), 1, 0.0, 0, 0},
                                             {"3", {0.2, scv_from_burst(0.2, 0.4)}, 1, 0.0, 1, -1});
    CHECK(s.queues[1].waiting == Approx(d.classes[2].waiting).epsilon(1e-4));
  }
}

TEST_CASE("solve_network invariants") {
  const auto ring = Topology::ring(6);
  const auto mesh = Topology::mesh(4, 4);
  for (const auto* topo : {&ring, &mesh})
    for (double pb : {0.0, 0.4}) {
      const auto g = build_queue_graph(*topo, uniform(0.3, pb));
      const auto s = solve_network(g);
      CHECK(s.iterations < 1000);
      // Rate-weighted queue waits.
      std::vector<double> num(g.model.queues.size(), 0.0), den(g.model.queues.size(), 0.0);
      for (const auto& c : s.classes) {
        CHECK(c.waiting >= 0.0);
        num[c.queue] += c.rate * c.waiting;
        den[c.queue] += c.rate;
      }
      for (std::size_t q = 0; q < num.size(); ++q)
        if (den[q] > 0)
          CHECK(s.queues[q].waiting == Approx(num[q] / den[q]));
      // Latency floor and composition.
      for (std::size_t f = 0; f < s.flows.size(); ++f) {
        const auto& fr = s.flows[f];
        const double hops = static_cast<double>(g.model.flows[f].hops.size());
        CHECK(fr.latency >= hops * 2.0 - 1e-12);
        double sum = 0.0;
        for (double w : fr.hop_wait)
          sum += w + 2.0;
        CHECK(fr.latency == Approx(sum));
      }
    }
}

TEST_CASE("zero-rate limit") {
  // Only the batch partners remain: p/(1-p) slots at injection, none on links.
  const auto mesh = Topology::mesh(4, 4);
  const double pb = 0.5;
  const auto g = build_queue_graph(mesh, uniform(1e-6, pb), 1, 1);
  const auto s = solve_network(g);
  for (std::size_t q = 0; q < s.queues.size(); ++q) {
    if (s.queues[q].rate <= 0.0)
      continue;
    const bool inj = static_cast<int>(q) % mesh.ports() == kInjectPort;
    CHECK(s.queues[q].waiting == Approx(inj ? pb / (1 - pb) : 0.0).epsilon(1e-4).scale(1));
  }
  for (std::size_t f = 0; f < s.flows.size(); ++f)
    CHECK(s.flows[f].latency ==
          Approx(2.0 * static_cast<double>(g.model.flows[f].hops.size()) + pb / (1 - pb))
              .epsilon(1e-4));
}

TEST_CASE("ring symmetry and relabeling") {
  const auto ring = Topology::ring(6);
  const auto g = build_queue_graph(ring, uniform(0.4, 0.4));
  const auto s = solve_network(g);
  for (int port = 0; port < ring.ports(); ++port)
    for (int node = 1; node < 6; ++node)
      CHECK(s.queues[ring.queue_id(node, port)].waiting ==
            Approx(s.queues[ring.queue_id(0, port)].waiting).epsilon(1e-6));

  // Rotating every flow by k nodes permutes the solution.
  const std::vector<FlowSpec> base{{0, 3, GGeoProcess(0.3, 0.5)},
                                   {1, 3, GGeoProcess(0.2, 0.2)},
                                   {4, 2, GGeoProcess(0.1, 0.6)}};
  const auto s0 = solve_network(build_queue_graph(ring, flows(base)));
  for (int k = 1; k < 6; ++k) {
    auto rot = base;
    for (auto& f : rot) {
      f.source = (f.source + k) % 6;
      f.destination = (f.destination + k) % 6;
    }
    const auto sk = solve_network(build_queue_graph(ring, flows(rot)));
    for (std::size_t i = 0; i < base.size(); ++i)
      CHECK(sk.flows[i].latency == Approx(s0.flows[i].latency).epsilon(1e-9));
  }
}

TEST_CASE("no-burst baseline") {
  const auto ring = Topology::ring(6);
  SUBCASE("equals the model without burstiness") {
    const auto g = build_queue_graph(ring, uniform(0.5, 0.0));
    CHECK(no_burst_baseline(g).mean_latency() == Approx(solve_network(g).mean_latency()));
  }
  SUBCASE("below the model with burstiness") {
    const auto g = build_queue_graph(ring, uniform(0.6, 0.6));
    CHECK(no_burst_baseline(g).mean_latency() < solve_network(g).mean_latency());
  }
  SUBCASE("latency grows with p_b and rate") {
    double prev = 0.0;
    for (double pb : {0.0, 0.2, 0.4, 0.6}) {
      const double l = solve_network(build_queue_graph(ring, uniform(0.4, pb))).mean_latency();
      CHECK(l > prev);
      prev = l;
    }
    prev = 0.0;
    for (double r : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
      const double l = solve_network(build_queue_graph(ring, uniform(r, 0.3))).mean_latency();
      CHECK(l > prev);
      prev = l;
    }
  }
}

TEST_CASE("longer service times") {
  const auto g = build_queue_graph(Topology::ring(4), uniform(0.15, 0.3), 2, 0);
  const auto s = solve_network(g);
  for (std::size_t f = 0; f < s.flows.size(); ++f)
    CHECK(s.flows[f].latency >= 2.0 * static_cast<double>(g.model.flows[f].hops.size()));
  CHECK(s.mean_latency() > 0.0);
}

TEST_CASE("model instability is reported with the queue") {
  const auto g = build_queue_graph(Topology::mesh(4, 4), uniform(0.8, 0.2));
  CHECK_THROWS_AS(solve_network(g), InstabilityError);
}

TEST_CASE("6x6 mesh solves quickly") {
  const auto g = build_queue_graph(Topology::mesh(6, 6), uniform(0.3, 0.4));
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = solve_network(g);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  CHECK(ms < 100.0);
  CHECK(s.iterations < 1000);
}

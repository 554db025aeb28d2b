#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nocperf/traffic.hpp"

namespace nocperf {

/// Cycle-accurate queueing-network oracle.
///
/// The model is a set of FIFO input queues feeding shared servers through
/// non-preemptive priority arbiters. A flit waits in its queue until it
/// reaches the head and wins arbitration at the server its route names for
/// that hop; it then occupies the server for service_time cycles, crosses a
/// link of link_latency cycles and lands in the next queue of its route.
/// Per-cycle order: arrivals, arbitration, departures. Lower rank wins;
/// equal ranks are served round-robin. Queues are unbounded.
struct SimServerSpec {
  int service_time = 1;
  std::string label;
};

struct SimQueueSpec {
  int rank = 0;
  std::string label;
};

struct SimHop {
  int queue = 0;
  int server = 0;
};

struct SimFlowSpec {
  std::vector<SimHop> hops;
  int src = 0;  // labels used in trace dumps and reports
  int dst = 0;
};

/// One GGeo injector. Every generated flit picks one of `flows` with the
/// given (unnormalized) weights.
struct SimSourceSpec {
  GGeoProcess process{0.1, 0.0};
  std::vector<int> flows;
  std::vector<double> weights;
};

struct SimModel {
  std::vector<SimServerSpec> servers;
  std::vector<SimQueueSpec> queues;
  std::vector<SimFlowSpec> flows;
  std::vector<SimSourceSpec> sources;
  int link_latency = 1;

  /// Throws ConfigError on dangling indices or empty routes.
  void validate() const;
  /// Offered load per server, sum of rate * service_time of the flows using it.
  std::vector<double> offered_load() const;
};

struct SimOptions {
  std::uint64_t warmup = 200000;
  std::uint64_t measure = 2000000;
  std::uint64_t seed = 1;
  // Measured flits still in flight after the window are drained for at
  // most this many extra cycles (0 = measure).
  std::uint64_t drain_limit = 0;
  bool conditional_occupancy = false;
  // Cross-check every arbitration decision (slower).
  bool audit = false;
  // When set, every injection is written as a `cycle,src,dst` line after a
  // header row.
  std::ostream* trace = nullptr;
};

struct StreamStats {
  std::uint64_t count = 0;
  double rate = 0.0;      // events per measured cycle
  double mean_gap = 0.0;  // cycles
  double scv = 0.0;       // of gaps
};

struct QueueStats {
  std::string label;
  int rank = 0;
  double mean_wait = 0.0;       // cycles, over measured flits
  std::uint64_t waits = 0;      // samples behind mean_wait
  double mean_occupancy = 0.0;  // waiting + in service
  double busy_fraction = 0.0;   // 1 - p(0)
  StreamStats arrivals;
  StreamStats departures;
};

struct ServerStats {
  std::string label;
  double utilization = 0.0;
  double offered_load = 0.0;
  std::vector<int> inputs;
  // cond_occupancy[m][k] = E[n_m * 1{server serving a flit from inputs[k]}]
  std::vector<std::vector<double>> cond_occupancy;
};

struct FlowStats {
  int src = 0;
  int dst = 0;
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t measured = 0;  // delivered flits injected inside the window
  double mean_latency = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  std::vector<double> hop_wait;  // mean wait at each hop of the route
  std::uint64_t min_latency = 0;
};

struct SimReport {
  std::uint64_t warmup = 0;
  std::uint64_t measure = 0;
  std::uint64_t seed = 0;
  std::uint64_t end_cycle = 0;
  bool saturated = false;
  std::vector<std::string> warnings;
  // Audit counts: grants that skipped a better-ranked waiting flit, and
  // cycles a server sat idle with a flit waiting for it.
  std::uint64_t priority_violations = 0;
  std::uint64_t idle_violations = 0;
  std::vector<FlowStats> flows;
  std::vector<QueueStats> queues;
  std::vector<ServerStats> servers;

  /// Flit-weighted mean latency over all flows.
  double mean_latency() const;
};

SimReport run_simulation(const SimModel& model, const SimOptions& options);

/// n-bar_{mk} estimates for one server, indexed like ServerStats::inputs.
std::vector<std::vector<double>> measure_conditional_occupancy(const SimReport& report, int server);

} // namespace nocperf

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nocperf/analytic.hpp"
#include "nocperf/simulator.hpp"
#include "nocperf/topology.hpp"

namespace nocperf {

/// One class of a queue: a flow restricted to that queue.
struct QueueClass {
  int flow = 0;
  int hop = 0;     // index in the flow's route
  int server = 0;  // output taken from this queue
  double rate = 0.0;
};

/// How two input queues of one server interact.
///   basic            each queue feeds only this server
///   contention_low   the lower-ranked queue also feeds other servers
///   contention_high  the higher-ranked queue also feeds other servers
///   contention_both  both do
enum class InteractionKind { basic, contention_low, contention_high, contention_both };

std::string_view interaction_name(InteractionKind kind);

struct Interaction {
  int server = 0;
  int high_queue = 0;  // the lower rank value; either queue on a tie
  int low_queue = 0;
  bool equal_rank = false;
  InteractionKind kind = InteractionKind::basic;
};

struct QueueGraph {
  SimModel model;
  std::vector<double> flow_rate;
  std::vector<std::vector<QueueClass>> classes;  // per queue
  std::vector<Interaction> interactions;         // filled by classify_structures

  /// Servers fed by queue q, ascending.
  std::vector<int> outputs(int queue) const;
};

/// Validates the model and derives the per-queue classes. Throws
/// InstabilityError naming the first queue or server loaded to >= 1.
QueueGraph build_queue_graph(SimModel model);
QueueGraph build_queue_graph(const Topology& topology, const TrafficPattern& pattern,
                             int service_time = 1, int link_latency = 1);

/// Labels every pair of queues contending at a server. Informational; the
/// solver treats all pairs through the same kernels.
void classify_structures(QueueGraph& graph);

struct SolveOptions {
  int max_iterations = 1000;
  double tolerance = 1e-6;  // max relative change of any class wait
};

struct QueueResult {
  std::string label;
  int rank = 0;
  double rate = 0.0;
  double waiting = 0.0;  // rate-weighted over its classes
  double util_hat = 0.0;
  double service_scv = 0.0;
};

struct ClassResult {
  int flow = 0;
  int queue = 0;
  int server = 0;
  double rate = 0.0;
  double waiting = 0.0;
};

struct FlowResult {
  int src = 0;
  int dst = 0;
  double rate = 0.0;
  double latency = 0.0;  // sum over hops of W + T + link latency
  std::vector<double> hop_wait;
};

struct NetworkSolution {
  std::vector<QueueResult> queues;
  std::vector<ClassResult> classes;
  std::vector<FlowResult> flows;
  int iterations = 0;
  double residual = 0.0;  // last max relative change
  Diagnostics diagnostics;

  /// Rate-weighted mean flow latency.
  double mean_latency() const;
};

NetworkSolution solve_network(const QueueGraph& graph, const SolveOptions& options = {});

/// solve_network with every source's burst probability forced to 0.
NetworkSolution no_burst_baseline(const QueueGraph& graph, const SolveOptions& options = {});

} // namespace nocperf

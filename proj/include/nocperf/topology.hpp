#pragma once

#include <string>
#include <vector>

#include "nocperf/simulator.hpp"
#include "nocperf/traffic.hpp"

namespace nocperf {

enum class TopologyKind { ring, mesh };

/// Router ports. Input port 0 is the injection queue; output port 0 is the
/// ejection server. Remaining ports are one per directed link.
///
/// Ring ports: 1 = clockwise (node + 1), 2 = counter-clockwise.
/// Mesh ports: 1 = north (row - 1), 2 = south, 3 = east (col + 1), 4 = west.
/// An input port is named after the output it was sent from upstream, so a
/// flit travelling east arrives on input port `east`.
class Topology {
public:
  static Topology ring(int nodes);
  static Topology mesh(int width, int height);

  TopologyKind kind() const noexcept { return kind_; }
  int nodes() const noexcept { return nodes_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int ports() const noexcept { return kind_ == TopologyKind::ring ? 3 : 5; }
  std::string name() const;

  /// Neighbour reached leaving `node` through output `port`, -1 if none.
  int neighbor(int node, int port) const;
  int row(int node) const { return node / width_; }
  int col(int node) const { return node % width_; }
  int node_at(int row, int col) const { return row * width_ + col; }

  int queue_id(int node, int in_port) const { return node * ports() + in_port; }
  int server_id(int node, int out_port) const { return node * ports() + out_port; }
  std::string queue_label(int queue) const;
  std::string server_label(int server) const;

private:
  Topology(TopologyKind kind, int nodes, int width, int height)
      : kind_(kind), nodes_(nodes), width_(width), height_(height) {}
  TopologyKind kind_;
  int nodes_;
  int width_;
  int height_;
};

inline constexpr int kInjectPort = 0;
inline constexpr int kEjectPort = 0;
inline constexpr int kRingCw = 1;
inline constexpr int kRingCcw = 2;
inline constexpr int kNorth = 1;
inline constexpr int kSouth = 2;
inline constexpr int kEast = 3;
inline constexpr int kWest = 4;

/// One step of a route: the flit waits in `queue` (an input queue of
/// `node`) and is served by that router's output `server`.
struct RouteHop {
  int node = 0;
  int in_port = 0;
  int out_port = 0;
  int queue = 0;
  int server = 0;
};

/// Deterministic route. Mesh: Y-X dimension order (rows first). Ring:
/// shorter arc, clockwise on ties. The first hop is the injection queue at
/// the source, the last hop is ejection at the destination.
std::vector<RouteHop> route(const Topology& topology, int source, int destination);

/// Number of link traversals of the route (queue count minus one).
int link_hops(const std::vector<RouteHop>& path);

/// Source-destination flow with its injection process.
struct FlowSpec {
  int source = 0;
  int destination = 0;
  GGeoProcess arrival{0.1, 0.0};
};

/// Uniform all-to-all pattern: every node is one GGeo source of rate
/// `rate`, each flit choosing one of the other nodes uniformly. Flow rates
/// are rate/(n - 1); flows of one source share its burst process.
struct TrafficPattern {
  enum class Kind { uniform, explicit_flows } kind = Kind::uniform;
  double rate = 0.1;
  double burst_prob = 0.0;
  std::vector<FlowSpec> flows;  // explicit_flows only

  /// Expanded flow list (uniform patterns materialize all n(n-1) flows).
  std::vector<FlowSpec> expand(const Topology& topology) const;
};

/// Translate a topology + pattern into the simulator's queue network.
/// Queue ranks: link inputs 0, injection 1.
SimModel build_sim_model(const Topology& topology, const TrafficPattern& pattern,
                         int service_time, int link_latency);

} // namespace nocperf

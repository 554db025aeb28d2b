#include "nocperf/topology.hpp"

#include <cstdlib>

#include "nocperf/error.hpp"

namespace nocperf {

Topology Topology::ring(int nodes) {
  if (nodes < 2)
    throw ConfigError("ring needs at least 2 nodes");
  return Topology(TopologyKind::ring, nodes, nodes, 1);
}

Topology Topology::mesh(int width, int height) {
  if (width < 2 || height < 2)
    throw ConfigError("mesh needs width and height >= 2");
  return Topology(TopologyKind::mesh, width * height, width, height);
}

std::string Topology::name() const {
  if (kind_ == TopologyKind::ring)
    return "ring" + std::to_string(nodes_) + "x1";
  return "mesh" + std::to_string(width_) + "x" + std::to_string(height_);
}

int Topology::neighbor(int node, int port) const {
  if (kind_ == TopologyKind::ring) {
    if (port == kRingCw)
      return (node + 1) % nodes_;
    if (port == kRingCcw)
      return (node + nodes_ - 1) % nodes_;
    return -1;
  }
  const int r = row(node), c = col(node);
  switch (port) {
  case kNorth:
    return r > 0 ? node_at(r - 1, c) : -1;
  case kSouth:
    return r + 1 < height_ ? node_at(r + 1, c) : -1;
  case kEast:
    return c + 1 < width_ ? node_at(r, c + 1) : -1;
  case kWest:
    return c > 0 ? node_at(r, c - 1) : -1;
  default:
    return -1;
  }
}

namespace {

const char* ring_port_name(int p) {
  static const char* names[] = {"local", "cw", "ccw"};
  return names[p];
}
const char* mesh_port_name(int p) {
  static const char* names[] = {"local", "n", "s", "e", "w"};
  return names[p];
}

} // namespace

std::string Topology::queue_label(int queue) const {
  const int node = queue / ports(), port = queue % ports();
  const char* p = kind_ == TopologyKind::ring ? ring_port_name(port) : mesh_port_name(port);
  return "r" + std::to_string(node) + ".in." + (port == kInjectPort ? "inj" : p);
}

std::string Topology::server_label(int server) const {
  const int node = server / ports(), port = server % ports();
  const char* p = kind_ == TopologyKind::ring ? ring_port_name(port) : mesh_port_name(port);
  return "r" + std::to_string(node) + ".out." + (port == kEjectPort ? "ej" : p);
}

std::vector<RouteHop> route(const Topology& topology, int source, int destination) {
  const int n = topology.nodes();
  if (source < 0 || source >= n || destination < 0 || destination >= n)
    throw ConfigError("route endpoint out of range");
  if (source == destination)
    throw ConfigError("route needs source != destination");

  std::vector<int> dirs;
  if (topology.kind() == TopologyKind::ring) {
    const int cw = (destination - source + n) % n;
    const int ccw = n - cw;
    if (cw <= ccw)
      dirs.assign(static_cast<std::size_t>(cw), kRingCw);
    else
      dirs.assign(static_cast<std::size_t>(ccw), kRingCcw);
  } else {
    const int dr = topology.row(destination) - topology.row(source);
    const int dc = topology.col(destination) - topology.col(source);
    for (int i = 0; i < std::abs(dr); ++i)
      dirs.push_back(dr > 0 ? kSouth : kNorth);
    for (int i = 0; i < std::abs(dc); ++i)
      dirs.push_back(dc > 0 ? kEast : kWest);
  }

  std::vector<RouteHop> path;
  path.reserve(dirs.size() + 1);
  int node = source;
  int in_port = kInjectPort;
  for (int d : dirs) {
    path.push_back({node, in_port, d, topology.queue_id(node, in_port),
                    topology.server_id(node, d)});
    node = topology.neighbor(node, d);
    in_port = d;
  }
  path.push_back({node, in_port, kEjectPort, topology.queue_id(node, in_port),
                  topology.server_id(node, kEjectPort)});
  return path;
}

int link_hops(const std::vector<RouteHop>& path) {
  return static_cast<int>(path.size()) - 1;
}

std::vector<FlowSpec> TrafficPattern::expand(const Topology& topology) const {
  if (kind == Kind::explicit_flows)
    return flows;
  std::vector<FlowSpec> out;
  const int n = topology.nodes();
  // Each flow is a Bernoulli thinning of its source's GGeo stream.
  const double keep = 1.0 / (n - 1);
  const GGeoProcess parent(rate, burst_prob);
  const MomentPair thinned = split_stream(parent.moments(), keep);
  const GGeoProcess per_flow(thinned.rate, burst_from_scv(thinned.rate, thinned.scv));
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (s != d)
        out.push_back({s, d, per_flow});
  return out;
}

SimModel build_sim_model(const Topology& topology, const TrafficPattern& pattern,
                         int service_time, int link_latency) {
  SimModel model;
  model.link_latency = link_latency;
  const int slots = topology.nodes() * topology.ports();
  model.servers.resize(static_cast<std::size_t>(slots));
  model.queues.resize(static_cast<std::size_t>(slots));
  for (int i = 0; i < slots; ++i) {
    model.servers[i] = {service_time, topology.server_label(i)};
    model.queues[i] = {i % topology.ports() == kInjectPort ? 1 : 0, topology.queue_label(i)};
  }

  const auto flows = pattern.expand(topology);
  for (const auto& f : flows) {
    SimFlowSpec sf;
    sf.src = f.source;
    sf.dst = f.destination;
    for (const auto& h : route(topology, f.source, f.destination))
      sf.hops.push_back({h.queue, h.server});
    model.flows.push_back(std::move(sf));
  }

  if (pattern.kind == TrafficPattern::Kind::uniform) {
    const int n = topology.nodes();
    for (int s = 0; s < n; ++s) {
      SimSourceSpec src{GGeoProcess(pattern.rate, pattern.burst_prob), {}, {}};
      for (std::size_t i = 0; i < flows.size(); ++i)
        if (flows[i].source == s) {
          src.flows.push_back(static_cast<int>(i));
          src.weights.push_back(1.0);
        }
      model.sources.push_back(std::move(src));
    }
  } else {
    for (std::size_t i = 0; i < flows.size(); ++i)
      model.sources.push_back({flows[i].arrival, {static_cast<int>(i)}, {1.0}});
  }
  return model;
}

} // namespace nocperf

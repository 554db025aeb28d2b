#include "nocperf/canonical.hpp"

#include <map>
#include <string>

#include "nocperf/error.hpp"

namespace nocperf {

CanonicalStructure parse_structure(std::string_view name) {
  if (name == "basic")
    return CanonicalStructure::basic;
  if (name == "contention-low" || name == "contention_low")
    return CanonicalStructure::contention_low;
  if (name == "contention-high" || name == "contention_high")
    return CanonicalStructure::contention_high;
  throw ConfigError("unknown canonical structure '" + std::string(name) + "'");
}

std::string_view structure_name(CanonicalStructure s) {
  switch (s) {
  case CanonicalStructure::basic:
    return "basic";
  case CanonicalStructure::contention_low:
    return "contention-low";
  case CanonicalStructure::contention_high:
    return "contention-high";
  }
  return "?";
}

SimModel build_canonical(CanonicalStructure structure, const CanonicalParams& params) {
  SimModel model;
  model.link_latency = 0;
  const auto& cls = params.classes;
  // Classes sharing a queue are generated by one injector and split by
  // rate, the way a router input port sees them.
  auto add_source = [&](const std::vector<int>& members) {
    double rate = 0.0;
    std::vector<int> flows;
    std::vector<double> weights;
    for (int f : members) {
      if (cls[f].burst_prob != cls[members.front()].burst_prob)
        throw ConfigError("classes sharing a queue must have the same burst_prob");
      if (cls[f].rate > 0.0) {
        rate += cls[f].rate;
        flows.push_back(f);
        weights.push_back(cls[f].rate);
      }
    }
    if (rate > 0.0)
      model.sources.push_back({GGeoProcess(rate, cls[members.front()].burst_prob), flows, weights});
  };

  if (structure == CanonicalStructure::basic) {
    if (cls.empty())
      throw ConfigError("basic structure needs at least one class");
    model.servers.push_back({params.service_time, "S"});
    std::map<int, std::vector<int>> members;
    for (std::size_t i = 0; i < cls.size(); ++i)
      members[cls[i].rank].push_back(static_cast<int>(i));
    std::map<int, int> queue_of_rank;
    for (const auto& [rank, m] : members) {
      queue_of_rank[rank] = static_cast<int>(model.queues.size());
      model.queues.push_back({rank, "q_rank" + std::to_string(rank)});
    }
    for (std::size_t i = 0; i < cls.size(); ++i)
      model.flows.push_back(
          {{{queue_of_rank[cls[i].rank], 0}}, static_cast<int>(i), static_cast<int>(i)});
    for (const auto& [rank, m] : members)
      add_source(m);
    return model;
  }

  if (cls.size() != 3)
    throw ConfigError(std::string(structure_name(structure)) + " structure needs exactly 3 classes");
  model.servers = {{params.service_time, "S_A"}, {params.service_time, "S_B"}};
  if (structure == CanonicalStructure::contention_low) {
    model.queues = {{0, "q1"}, {1, "q2"}};
    model.flows = {{{{0, 0}}, 0, 0}, {{{1, 0}}, 1, 1}, {{{1, 1}}, 2, 2}};
    add_source({0});
    add_source({1, 2});
  } else {
    model.queues = {{0, "q1"}, {1, "q3"}};
    model.flows = {{{{0, 0}}, 0, 0}, {{{0, 1}}, 1, 1}, {{{1, 1}}, 2, 2}};
    add_source({0, 1});
    add_source({2});
  }
  return model;
}

SimReport run_canonical(CanonicalStructure structure, const CanonicalParams& params,
                        const SimOptions& options) {
  SimOptions opts = options;
  opts.conditional_occupancy = true;
  return run_simulation(build_canonical(structure, params), opts);
}

} // namespace nocperf

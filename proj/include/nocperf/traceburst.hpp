#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nocperf {

struct TraceEvent {
  std::uint64_t cycle = 0;
  int src = 0;
  int dst = 0;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Trace CSV: optional `cycle,src,dst` header, one event per line, `#`
/// comments and blank lines ignored. Events must be sorted by cycle.
/// Throws ConfigError with the offending line number.
std::vector<TraceEvent> parse_trace(std::istream& in, const std::string& name = "trace");
std::vector<TraceEvent> load_trace(const std::string& path);

struct EstimateKey {
  int src = 0;
  int dst = -1;  // -1 when estimating per source
};

struct RateEstimate {
  std::uint64_t window = 0;
  EstimateKey key;
  double rate = 0.0;
};

/// Events per cycle of every source (or flow) in every window. Windows
/// start at cycle 0 and run to the window holding the last event. Keys
/// absent from a window report 0.
std::vector<RateEstimate> estimate_rate(const std::vector<TraceEvent>& events,
                                        std::uint64_t window_len = 200000,
                                        bool per_flow = false);

enum class EstimateFlag {
  ok,
  no_events,           // nothing injected in the window
  below_bernoulli,     // inverted scv < 1 - rate; burst_prob reported as 0
  unstable,            // virtual queue utilization >= 1
};

std::string_view flag_name(EstimateFlag flag);

struct WindowEstimate {
  std::uint64_t window = 0;
  EstimateKey key;
  double rate = 0.0;
  double occupancy = 0.0;  // time-average virtual queue population
  double arrival_scv = 0.0;
  double burst_prob = 0.0;
  EstimateFlag flag = EstimateFlag::ok;
};

struct BurstOptions {
  int service_time = 1;
  std::uint64_t window_len = 200000;
  bool per_flow = false;
};

/// Replays each window's arrivals of a key through a deterministic
/// single-server queue, then inverts the GGeo/D/1 occupancy for the
/// arrival scv and the burst probability. The virtual queue starts empty
/// in every window.
std::vector<WindowEstimate> estimate_burstiness(const std::vector<TraceEvent>& events,
                                                const BurstOptions& options = {});

/// Time-average population of a deterministic queue fed by the given
/// per-cycle arrivals, sampled once per cycle over `cycles` cycles.
double virtual_queue_occupancy(const std::vector<std::uint64_t>& arrival_cycles,
                               std::uint64_t start, std::uint64_t cycles, int service_time);

std::string estimates_to_json(const std::vector<WindowEstimate>& estimates);

} // namespace nocperf

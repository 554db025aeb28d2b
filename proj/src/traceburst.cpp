#include "nocperf/traceburst.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "nocperf/analytic.hpp"
#include "nocperf/error.hpp"
#include "nocperf/traffic.hpp"

namespace nocperf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_field(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty())
    return false;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

} // namespace

std::vector<TraceEvent> parse_trace(std::istream& in, const std::string& name) {
  std::vector<TraceEvent> events;
  std::string line;
  int lineno = 0;
  bool seen_row = false;
  auto fail = [&](const std::string& why) {
    throw ConfigError(name + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#')
      continue;
    if (!seen_row && s == "cycle,src,dst") {
      seen_row = true;
      continue;
    }
    seen_row = true;
    const auto c1 = s.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : s.find(',', c1 + 1);
    if (c2 == std::string_view::npos || s.find(',', c2 + 1) != std::string_view::npos)
      fail("expected three fields cycle,src,dst");
    TraceEvent e;
    if (!parse_field(s.substr(0, c1), e.cycle) ||
        !parse_field(s.substr(c1 + 1, c2 - c1 - 1), e.src) ||
        !parse_field(s.substr(c2 + 1), e.dst))
      fail("fields must be nonnegative decimal integers");
    if (e.src < 0 || e.dst < 0)
      fail("node ids must be nonnegative");
    if (e.src == e.dst)
      fail("source equals destination");
    if (!events.empty() && e.cycle < events.back().cycle)
      fail("events are not sorted by cycle");
    events.push_back(e);
  }
  return events;
}

std::vector<TraceEvent> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open trace '" + path + "'");
  return parse_trace(in, path);
}

namespace {

using Key = std::pair<int, int>;

Key key_of(const TraceEvent& e, bool per_flow) { return {e.src, per_flow ? e.dst : -1}; }

// Arrival cycles per key, in order.
std::map<Key, std::vector<std::uint64_t>> by_key(const std::vector<TraceEvent>& events,
                                                 bool per_flow) {
  std::map<Key, std::vector<std::uint64_t>> out;
  for (const auto& e : events)
    out[key_of(e, per_flow)].push_back(e.cycle);
  return out;
}

std::uint64_t window_count(const std::vector<TraceEvent>& events, std::uint64_t len) {
  return events.empty() ? 0 : events.back().cycle / len + 1;
}

} // namespace

std::vector<RateEstimate> estimate_rate(const std::vector<TraceEvent>& events,
                                        std::uint64_t window_len, bool per_flow) {
  if (window_len < 1)
    throw DomainError("window length must be >= 1");
  const auto keys = by_key(events, per_flow);
  const std::uint64_t nw = window_count(events, window_len);
  std::vector<RateEstimate> out;
  for (std::uint64_t w = 0; w < nw; ++w)
    for (const auto& [k, cycles] : keys) {
      const auto lo = std::lower_bound(cycles.begin(), cycles.end(), w * window_len);
      const auto hi = std::lower_bound(cycles.begin(), cycles.end(), (w + 1) * window_len);
      out.push_back({w, {k.first, k.second},
                     static_cast<double>(hi - lo) / static_cast<double>(window_len)});
    }
  return out;
}

std::string_view flag_name(EstimateFlag flag) {
  switch (flag) {
  case EstimateFlag::ok: return "ok";
  case EstimateFlag::no_events: return "no_events";
  case EstimateFlag::below_bernoulli: return "below_bernoulli";
  case EstimateFlag::unstable: return "unstable";
  }
  return "?";
}

double virtual_queue_occupancy(const std::vector<std::uint64_t>& arrival_cycles,
                               std::uint64_t start, std::uint64_t cycles, int service_time) {
  if (service_time < 1)
    throw DomainError("service_time must be >= 1");
  if (cycles == 0)
    return 0.0;
  const std::uint64_t end = start + cycles;
  auto it = std::lower_bound(arrival_cycles.begin(), arrival_cycles.end(), start);
  std::uint64_t n = 0, remaining = 0;
  long double sum = 0;
  std::uint64_t t = start;
  while (t < end) {
    if (n == 0) {
      if (it == arrival_cycles.end() || *it >= end)
        break;
      t = *it;  // idle until the next arrival
    }
    while (it != arrival_cycles.end() && *it == t) {
      ++n;
      ++it;
    }
    // Population sampled after this cycle's arrivals, counting the flit in
    // service.
    sum += n;
    if (remaining == 0)
      remaining = service_time;
    if (--remaining == 0)
      --n;
    ++t;
  }
  return static_cast<double>(sum / cycles);
}

std::vector<WindowEstimate> estimate_burstiness(const std::vector<TraceEvent>& events,
                                                const BurstOptions& options) {
  if (options.window_len < 1)
    throw DomainError("window length must be >= 1");
  if (options.service_time < 1)
    throw DomainError("service_time must be >= 1");
  const auto keys = by_key(events, options.per_flow);
  const std::uint64_t len = options.window_len;
  const std::uint64_t nw = window_count(events, len);
  std::vector<WindowEstimate> out;
  for (std::uint64_t w = 0; w < nw; ++w)
    for (const auto& [k, cycles] : keys) {
      WindowEstimate est;
      est.window = w;
      est.key = {k.first, k.second};
      const auto lo = std::lower_bound(cycles.begin(), cycles.end(), w * len);
      const auto hi = std::lower_bound(cycles.begin(), cycles.end(), (w + 1) * len);
      est.rate = static_cast<double>(hi - lo) / static_cast<double>(len);
      if (est.rate <= 0.0) {
        est.flag = EstimateFlag::no_events;
        out.push_back(est);
        continue;
      }
      const double rho = est.rate * options.service_time;
      est.occupancy = virtual_queue_occupancy(cycles, w * len, len, options.service_time);
      if (rho >= 1.0) {
        est.flag = EstimateFlag::unstable;
        out.push_back(est);
        continue;
      }
      // Occupancy closed form solved for the arrival scv with C_s^2 = 0.
      est.arrival_scv = 2.0 * est.occupancy * (1.0 - rho) / rho - 1.0 + rho;
      if (est.arrival_scv < 1.0 - est.rate) {
        est.flag = EstimateFlag::below_bernoulli;
        est.burst_prob = 0.0;
      } else {
        est.burst_prob = burst_from_scv(est.rate, est.arrival_scv);
      }
      out.push_back(est);
    }
  return out;
}

std::string estimates_to_json(const std::vector<WindowEstimate>& estimates) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : estimates) {
    nlohmann::ordered_json j;
    j["window"] = e.window;
    j["src"] = e.key.src;
    if (e.key.dst >= 0)
      j["dst"] = e.key.dst;
    j["rate"] = e.rate;
    j["occupancy"] = e.occupancy;
    j["arrival_scv"] = e.arrival_scv;
    j["burst_prob"] = e.burst_prob;
    j["flag"] = std::string(flag_name(e.flag));
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

} // namespace nocperf

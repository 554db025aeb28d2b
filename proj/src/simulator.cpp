#include "nocperf/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <ostream>

#include "nocperf/error.hpp"

namespace nocperf {

void SimModel::validate() const {
  const int nq = static_cast<int>(queues.size());
  const int ns = static_cast<int>(servers.size());
  if (link_latency < 0)
    throw ConfigError("link latency must be >= 0");
  for (const auto& s : servers)
    if (s.service_time < 1)
      throw ConfigError("server '" + s.label + "' needs service_time >= 1");
  for (std::size_t f = 0; f < flows.size(); ++f) {
    if (flows[f].hops.empty())
      throw ConfigError("flow " + std::to_string(f) + " has an empty route");
    for (const auto& h : flows[f].hops)
      if (h.queue < 0 || h.queue >= nq || h.server < 0 || h.server >= ns)
        throw ConfigError("flow " + std::to_string(f) + " references a missing queue/server");
  }
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& src = sources[s];
    if (src.flows.empty() || src.flows.size() != src.weights.size())
      throw ConfigError("source " + std::to_string(s) + " needs matching flows and weights");
    double total = 0;
    for (std::size_t i = 0; i < src.flows.size(); ++i) {
      if (src.flows[i] < 0 || src.flows[i] >= static_cast<int>(flows.size()))
        throw ConfigError("source " + std::to_string(s) + " references a missing flow");
      if (!(src.weights[i] >= 0))
        throw ConfigError("source " + std::to_string(s) + " has a negative weight");
      total += src.weights[i];
    }
    if (!(total > 0))
      throw ConfigError("source " + std::to_string(s) + " has zero total weight");
  }
}

std::vector<double> SimModel::offered_load() const {
  std::vector<double> load(servers.size(), 0.0);
  for (const auto& src : sources) {
    double total = 0;
    for (double w : src.weights)
      total += w;
    for (std::size_t i = 0; i < src.flows.size(); ++i) {
      const double rate = src.process.rate() * src.weights[i] / total;
      for (const auto& h : flows[src.flows[i]].hops)
        load[h.server] += rate * servers[h.server].service_time;
    }
  }
  return load;
}

double SimReport::mean_latency() const {
  double sum = 0;
  std::uint64_t n = 0;
  for (const auto& f : flows) {
    sum += f.mean_latency * static_cast<double>(f.measured);
    n += f.measured;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Flit {
  std::uint32_t flow;
  std::uint32_t hop;
  std::int32_t server;  // requested at the current hop
  std::uint64_t injected;
  std::uint64_t arrived;  // at the current queue
  bool tagged;
};

struct Arrival {
  int queue;
  Flit flit;
};

// Gap statistics of an event stream observed inside the window.
struct GapAccumulator {
  std::uint64_t count = 0;
  std::uint64_t last = 0;
  long double sum = 0, sumsq = 0;
  std::uint64_t gaps = 0;

  void add(std::uint64_t cycle) {
    if (count > 0) {
      const auto g = static_cast<long double>(cycle - last);
      sum += g;
      sumsq += g * g;
      ++gaps;
    }
    last = cycle;
    ++count;
  }

  StreamStats finish(std::uint64_t window) const {
    StreamStats s;
    s.count = count;
    s.rate = window ? static_cast<double>(count) / static_cast<double>(window) : 0.0;
    if (gaps > 0) {
      const long double mean = sum / gaps;
      s.mean_gap = static_cast<double>(mean);
      if (mean > 0)
        s.scv = static_cast<double>((sumsq / gaps - mean * mean) / (mean * mean));
    }
    return s;
  }
};

struct SourceState {
  GGeoSampler sampler;
  std::uint64_t next = 0;
  std::vector<double> cumulative;
};

int pick(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end())
    --it;
  return static_cast<int>(it - cumulative.begin());
}

double percentile(const std::vector<std::uint64_t>& hist, std::uint64_t total, double q) {
  if (total == 0)
    return 0.0;
  const auto target = static_cast<std::uint64_t>(std::ceil(q * static_cast<double>(total)));
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    acc += hist[i];
    if (acc >= std::max<std::uint64_t>(target, 1))
      return static_cast<double>(i);
  }
  return static_cast<double>(hist.size() - 1);
}

} // namespace

SimReport run_simulation(const SimModel& model, const SimOptions& options) {
  model.validate();
  if (options.measure == 0)
    throw ConfigError("measure window must be > 0");

  const int nq = static_cast<int>(model.queues.size());
  const int ns = static_cast<int>(model.servers.size());
  const int nf = static_cast<int>(model.flows.size());

  SimReport report;
  report.warmup = options.warmup;
  report.measure = options.measure;
  report.seed = options.seed;

  if (options.trace)
    *options.trace << "cycle,src,dst\n";

  const auto load = model.offered_load();
  for (int s = 0; s < ns; ++s)
    if (load[s] >= 1.0) {
      report.saturated = true;
      report.warnings.push_back("server '" + model.servers[s].label + "' offered load " +
                                std::to_string(load[s]) + " >= 1");
    }

  // Server input lists; every (flow, hop) knows its input slot at the server.
  std::vector<std::vector<int>> inputs(ns);
  for (const auto& f : model.flows)
    for (const auto& h : f.hops) {
      auto& in = inputs[h.server];
      if (std::find(in.begin(), in.end(), h.queue) == in.end())
        in.push_back(h.queue);
    }
  for (auto& in : inputs) {
    std::sort(in.begin(), in.end());
    if (in.size() > 64)
      throw ConfigError("a server may have at most 64 input queues");
  }
  std::vector<std::vector<int>> hop_slot(nf);
  for (int f = 0; f < nf; ++f)
    for (const auto& h : model.flows[f].hops) {
      const auto& in = inputs[h.server];
      hop_slot[f].push_back(
          static_cast<int>(std::lower_bound(in.begin(), in.end(), h.queue) - in.begin()));
    }
  // Per server: input masks grouped by rank, best rank first.
  std::vector<std::vector<std::uint64_t>> rank_masks(ns);
  for (int s = 0; s < ns; ++s) {
    std::map<int, std::uint64_t> by_rank;
    for (std::size_t i = 0; i < inputs[s].size(); ++i)
      by_rank[model.queues[inputs[s][i]].rank] |= std::uint64_t{1} << i;
    for (const auto& [rank, mask] : by_rank)
      rank_masks[s].push_back(mask);
  }

  std::vector<SourceState> sources;
  sources.reserve(model.sources.size());
  for (std::size_t i = 0; i < model.sources.size(); ++i) {
    const auto& spec = model.sources[i];
    SourceState st{GGeoSampler(spec.process, splitmix64(options.seed * 0x100000001b3ULL + i)), 0,
                   {}};
    double acc = 0;
    for (double w : spec.weights)
      st.cumulative.push_back(acc += w);
    st.next = st.sampler.next_gap();
    sources.push_back(std::move(st));
  }

  int max_service = 1;
  for (const auto& s : model.servers)
    max_service = std::max(max_service, s.service_time);
  const std::size_t horizon = static_cast<std::size_t>(max_service + model.link_latency + 1);
  std::vector<std::vector<Arrival>> calendar(horizon);

  std::vector<std::deque<Flit>> queues(nq);
  std::vector<std::uint64_t> busy_until(ns, 0);
  std::vector<int> serving_slot(ns, -1);
  std::vector<int> rr(ns, 0);
  std::vector<std::uint64_t> requests(ns, 0);
  std::vector<int> requested;
  requested.reserve(static_cast<std::size_t>(ns));
  // Flits of each queue waiting or in service.
  std::vector<int> occ(nq, 0);
  std::vector<int> best_rank(options.audit ? ns : 0);
  // Head-of-line request of each queue this cycle, -1 when empty or granted.
  std::vector<int> pending(options.audit ? nq : 0);

  const std::uint64_t window_begin = options.warmup;
  const std::uint64_t window_end = options.warmup + options.measure;
  std::vector<std::uint64_t> occ_sum(nq, 0), busy_cycles_q(nq, 0), wait_n(nq, 0);
  std::vector<long double> wait_sum(nq, 0);
  std::vector<GapAccumulator> q_arr(nq), q_dep(nq);
  std::vector<std::uint64_t> server_busy(ns, 0);
  std::vector<std::vector<std::vector<std::uint64_t>>> cond(ns);
  if (options.conditional_occupancy)
    for (int s = 0; s < ns; ++s)
      cond[s].assign(inputs[s].size(), std::vector<std::uint64_t>(inputs[s].size(), 0));

  std::vector<FlowStats> flow_stats(nf);
  std::vector<std::vector<std::uint64_t>> hist(nf);
  std::vector<long double> lat_sum(nf, 0);
  std::vector<std::vector<long double>> hop_wait_sum(nf);
  std::vector<std::vector<std::uint64_t>> hop_wait_n(nf);
  std::vector<std::uint64_t> min_lat(nf, std::numeric_limits<std::uint64_t>::max());
  for (int f = 0; f < nf; ++f) {
    flow_stats[f].src = model.flows[f].src;
    flow_stats[f].dst = model.flows[f].dst;
    hop_wait_sum[f].assign(model.flows[f].hops.size(), 0);
    hop_wait_n[f].assign(model.flows[f].hops.size(), 0);
  }
  std::uint64_t tagged_outstanding = 0;
  std::int64_t in_system = 0;
  std::int64_t backlog_at_start = 0;
  std::uint64_t injected_in_window = 0;

  const std::uint64_t drain = options.drain_limit ? options.drain_limit : options.measure;
  const std::uint64_t hard_end = window_end + drain;

  auto enqueue = [&](int q, Flit flit, std::uint64_t t) {
    flit.arrived = t;
    flit.server = model.flows[flit.flow].hops[flit.hop].server;
    if (t >= window_begin && t < window_end)
      q_arr[q].add(t);
    ++occ[q];
    queues[q].push_back(flit);
  };

  std::uint64_t t = 0;
  for (;; ++t) {
    if (t == window_begin)
      backlog_at_start = in_system;
    if (t == window_end && in_system - backlog_at_start >
                               std::max<std::int64_t>(1000, static_cast<std::int64_t>(
                                                                injected_in_window / 1000))) {
      report.saturated = true;
      report.warnings.push_back("backlog grew by " + std::to_string(in_system - backlog_at_start) +
                                " flits over the measurement window");
    }
    if (t >= window_end && (tagged_outstanding == 0 || t >= hard_end || report.saturated))
      break;
    const bool in_window = t >= window_begin && t < window_end;

    // Service completions.
    for (int s = 0; s < ns; ++s)
      if (serving_slot[s] >= 0 && busy_until[s] == t) {
        --occ[inputs[s][serving_slot[s]]];
        serving_slot[s] = -1;
      }

    // Link arrivals scheduled for this cycle.
    auto& bucket = calendar[t % horizon];
    for (auto& a : bucket)
      enqueue(a.queue, a.flit, t);
    bucket.clear();

    // Injections.
    for (std::size_t i = 0; i < sources.size(); ++i) {
      auto& st = sources[i];
      const auto& spec = model.sources[i];
      while (st.next == t) {
        const int f = spec.flows[pick(st.cumulative, st.sampler.uniform())];
        Flit flit{static_cast<std::uint32_t>(f), 0, 0, t, t, in_window};
        ++flow_stats[f].injected;
        ++in_system;
        if (in_window) {
          ++tagged_outstanding;
          ++injected_in_window;
        }
        if (options.trace)
          *options.trace << t << ',' << model.flows[f].src << ',' << model.flows[f].dst << '\n';
        enqueue(model.flows[f].hops[0].queue, flit, t);
        st.next = t + st.sampler.next_gap();
      }
    }

    // Arbitration. Each head-of-line flit requests exactly one server, so
    // servers can be resolved independently.
    if (options.audit) {
      std::fill(best_rank.begin(), best_rank.end(), std::numeric_limits<int>::max());
      std::fill(pending.begin(), pending.end(), -1);
    }
    for (int q = 0; q < nq; ++q) {
      if (queues[q].empty())
        continue;
      const Flit& head = queues[q].front();
      if (options.audit) {
        best_rank[head.server] = std::min(best_rank[head.server], model.queues[q].rank);
        pending[q] = head.server;
      }
      if (requests[head.server] == 0)
        requested.push_back(head.server);
      requests[head.server] |= std::uint64_t{1} << hop_slot[head.flow][head.hop];
    }
    for (int s : requested) {
      const std::uint64_t req = requests[s];
      requests[s] = 0;
      if (busy_until[s] > t)
        continue;
      std::uint64_t cand = 0;
      for (std::uint64_t mask : rank_masks[s])
        if ((cand = req & mask) != 0)
          break;
      // Round-robin: first candidate at or after the pointer, else wrap.
      const std::uint64_t upper = rr[s] < 64 ? cand & (~std::uint64_t{0} << rr[s]) : 0;
      const int slot = std::countr_zero(upper ? upper : cand);
      rr[s] = slot + 1;
      const int q = inputs[s][slot];
      if (options.audit) {
        if (model.queues[q].rank > best_rank[s])
          ++report.priority_violations;
        pending[q] = -1;
      }

      Flit flit = queues[q].front();
      queues[q].pop_front();
      const int T = model.servers[s].service_time;
      busy_until[s] = t + static_cast<std::uint64_t>(T);
      serving_slot[s] = slot;
      if (in_window)
        q_dep[q].add(t);
      if (flit.tagged) {
        const auto w = static_cast<long double>(t - flit.arrived);
        wait_sum[q] += w;
        ++wait_n[q];
        hop_wait_sum[flit.flow][flit.hop] += w;
        ++hop_wait_n[flit.flow][flit.hop];
      }
      const std::uint64_t next_time = t + static_cast<std::uint64_t>(T + model.link_latency);
      const auto& hops = model.flows[flit.flow].hops;
      if (flit.hop + 1 < hops.size()) {
        ++flit.hop;
        calendar[next_time % horizon].push_back({hops[flit.hop].queue, flit});
      } else {
        auto& fs = flow_stats[flit.flow];
        ++fs.delivered;
        --in_system;
        if (flit.tagged) {
          const std::uint64_t lat = next_time - flit.injected;
          ++fs.measured;
          lat_sum[flit.flow] += static_cast<long double>(lat);
          auto& h = hist[flit.flow];
          if (h.size() <= lat)
            h.resize(lat + 1, 0);
          ++h[lat];
          min_lat[flit.flow] = std::min(min_lat[flit.flow], lat);
          --tagged_outstanding;
        }
      }
    }
    requested.clear();
    if (options.audit)
      for (int q = 0; q < nq; ++q)
        if (pending[q] >= 0 && busy_until[pending[q]] <= t)
          ++report.idle_violations;

    // Time averages.
    if (in_window) {
      for (int q = 0; q < nq; ++q) {
        occ_sum[q] += static_cast<std::uint64_t>(occ[q]);
        busy_cycles_q[q] += occ[q] > 0;
      }
      for (int s = 0; s < ns; ++s) {
        if (serving_slot[s] < 0)
          continue;
        ++server_busy[s];
        if (options.conditional_occupancy) {
          auto& c = cond[s];
          const int k = serving_slot[s];
          for (std::size_t m = 0; m < inputs[s].size(); ++m)
            c[m][k] += static_cast<std::uint64_t>(occ[inputs[s][m]]);
        }
      }
    }
  }

  report.end_cycle = t;
  for (int q = 0; q < nq; ++q)
    if (static_cast<double>(busy_cycles_q[q]) >= 0.999 * static_cast<double>(options.measure)) {
      report.saturated = true;
      report.warnings.push_back("queue '" + model.queues[q].label + "' never drained");
      break;
    }
  if (tagged_outstanding > 0) {
    report.saturated = true;
    report.warnings.push_back(std::to_string(tagged_outstanding) +
                              " measured flits undelivered after drain");
  }

  const auto window = static_cast<long double>(options.measure);
  report.queues.resize(nq);
  for (int q = 0; q < nq; ++q) {
    auto& qs = report.queues[q];
    qs.label = model.queues[q].label;
    qs.rank = model.queues[q].rank;
    qs.waits = wait_n[q];
    qs.mean_wait = wait_n[q] ? static_cast<double>(wait_sum[q] / wait_n[q]) : 0.0;
    qs.mean_occupancy = static_cast<double>(static_cast<long double>(occ_sum[q]) / window);
    qs.busy_fraction = static_cast<double>(static_cast<long double>(busy_cycles_q[q]) / window);
    qs.arrivals = q_arr[q].finish(options.measure);
    qs.departures = q_dep[q].finish(options.measure);
  }
  report.servers.resize(ns);
  for (int s = 0; s < ns; ++s) {
    auto& ss = report.servers[s];
    ss.label = model.servers[s].label;
    ss.utilization = static_cast<double>(static_cast<long double>(server_busy[s]) / window);
    ss.offered_load = load[s];
    ss.inputs = inputs[s];
    if (options.conditional_occupancy) {
      ss.cond_occupancy.assign(inputs[s].size(), std::vector<double>(inputs[s].size(), 0.0));
      for (std::size_t m = 0; m < inputs[s].size(); ++m)
        for (std::size_t k = 0; k < inputs[s].size(); ++k)
          ss.cond_occupancy[m][k] =
              static_cast<double>(static_cast<long double>(cond[s][m][k]) / window);
    }
  }
  for (int f = 0; f < nf; ++f) {
    auto& fs = flow_stats[f];
    fs.in_flight = fs.injected - fs.delivered;
    if (fs.measured) {
      fs.mean_latency = static_cast<double>(lat_sum[f] / fs.measured);
      fs.p50 = percentile(hist[f], fs.measured, 0.50);
      fs.p95 = percentile(hist[f], fs.measured, 0.95);
      fs.p99 = percentile(hist[f], fs.measured, 0.99);
      fs.min_latency = min_lat[f];
    }
    fs.hop_wait.resize(hop_wait_sum[f].size());
    for (std::size_t h = 0; h < fs.hop_wait.size(); ++h)
      fs.hop_wait[h] =
          hop_wait_n[f][h] ? static_cast<double>(hop_wait_sum[f][h] / hop_wait_n[f][h]) : 0.0;
  }
  report.flows = std::move(flow_stats);
  return report;
}

std::vector<std::vector<double>> measure_conditional_occupancy(const SimReport& report,
                                                               int server) {
  if (server < 0 || server >= static_cast<int>(report.servers.size()))
    throw DomainError("no such server");
  const auto& s = report.servers[server];
  if (s.cond_occupancy.empty() && !s.inputs.empty())
    throw DomainError("run was made without conditional_occupancy enabled");
  return s.cond_occupancy;
}

} // namespace nocperf

#include "nocperf/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "nocperf/error.hpp"

namespace nocperf {

std::string_view interaction_name(InteractionKind kind) {
  switch (kind) {
  case InteractionKind::basic: return "basic";
  case InteractionKind::contention_low: return "contention_low";
  case InteractionKind::contention_high: return "contention_high";
  case InteractionKind::contention_both: return "contention_both";
  }
  return "?";
}

std::vector<int> QueueGraph::outputs(int queue) const {
  std::vector<int> out;
  for (const auto& c : classes[queue])
    if (c.rate > 0.0)
      out.push_back(c.server);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

QueueGraph build_queue_graph(SimModel model) {
  model.validate();
  QueueGraph g;
  g.flow_rate.assign(model.flows.size(), 0.0);
  for (const auto& src : model.sources) {
    double total = 0.0;
    for (double w : src.weights)
      total += w;
    for (std::size_t i = 0; i < src.flows.size(); ++i)
      if (total > 0.0)
        g.flow_rate[src.flows[i]] += src.process.rate() * src.weights[i] / total;
  }
  g.classes.resize(model.queues.size());
  std::vector<double> queue_load(model.queues.size(), 0.0);
  for (std::size_t f = 0; f < model.flows.size(); ++f) {
    const auto& hops = model.flows[f].hops;
    for (std::size_t h = 0; h < hops.size(); ++h) {
      g.classes[hops[h].queue].push_back(
          {static_cast<int>(f), static_cast<int>(h), hops[h].server, g.flow_rate[f]});
      queue_load[hops[h].queue] += g.flow_rate[f] * model.servers[hops[h].server].service_time;
    }
  }
  for (std::size_t q = 0; q < queue_load.size(); ++q)
    if (queue_load[q] >= 1.0)
      throw InstabilityError("queue '" + model.queues[q].label + "' offered load " +
                                 std::to_string(queue_load[q]) + " >= 1",
                             model.queues[q].label);
  const auto load = model.offered_load();
  for (std::size_t s = 0; s < load.size(); ++s)
    if (load[s] >= 1.0)
      throw InstabilityError("server '" + model.servers[s].label + "' offered load " +
                                 std::to_string(load[s]) + " >= 1",
                             model.servers[s].label);
  g.model = std::move(model);
  return g;
}

QueueGraph build_queue_graph(const Topology& topology, const TrafficPattern& pattern,
                             int service_time, int link_latency) {
  return build_queue_graph(build_sim_model(topology, pattern, service_time, link_latency));
}

void classify_structures(QueueGraph& graph) {
  graph.interactions.clear();
  const int ns = static_cast<int>(graph.model.servers.size());
  std::vector<std::vector<int>> inputs(ns);
  std::vector<std::vector<int>> outs(graph.classes.size());
  for (std::size_t q = 0; q < graph.classes.size(); ++q) {
    outs[q] = graph.outputs(static_cast<int>(q));
    for (int s : outs[q])
      inputs[s].push_back(static_cast<int>(q));
  }
  for (int s = 0; s < ns; ++s)
    for (std::size_t i = 0; i < inputs[s].size(); ++i)
      for (std::size_t j = i + 1; j < inputs[s].size(); ++j) {
        int a = inputs[s][i], b = inputs[s][j];
        const int ra = graph.model.queues[a].rank, rb = graph.model.queues[b].rank;
        if (rb < ra)
          std::swap(a, b);
        Interaction x{s, a, b, ra == rb, InteractionKind::basic};
        const bool high_shared = outs[a].size() > 1, low_shared = outs[b].size() > 1;
        if (high_shared && low_shared)
          x.kind = InteractionKind::contention_both;
        else if (high_shared)
          x.kind = InteractionKind::contention_high;
        else if (low_shared)
          x.kind = InteractionKind::contention_low;
        graph.interactions.push_back(x);
      }
}

double NetworkSolution::mean_latency() const {
  double sum = 0.0, rate = 0.0;
  for (const auto& f : flows) {
    sum += f.rate * f.latency;
    rate += f.rate;
  }
  return rate > 0.0 ? sum / rate : 0.0;
}

namespace {

// Flits of one source that share a route prefix ending at `queue`. They
// form one arrival stream there and split over its outputs.
struct Group {
  int queue = 0;
  int parent = -1;
  int source = 0;
  int spacing = 0;  // upstream service time; 0 at the injection queue
  double rate = 0.0;
  std::vector<std::pair<int, double>> out;  // (entry, rate)
};

// A (queue, server) pair carrying traffic.
struct Entry {
  int queue = 0;
  int server = 0;
  double rate = 0.0;
  double t_hat = 1.0;
  double scv_hat = 0.0;
};

struct Layout {
  std::vector<Group> groups;
  std::vector<Entry> entries;
  std::vector<std::vector<int>> queue_groups;   // per queue
  std::vector<std::vector<int>> queue_entries;  // per queue
  std::vector<std::vector<int>> server_entries; // per server
  std::vector<std::vector<int>> flow_path;      // per flow: (group) per hop
  std::vector<std::vector<int>> flow_entry;     // per flow: entry per hop
};

int entry_of(Layout& l, std::map<std::pair<int, int>, int>& index, int q, int s) {
  auto [it, fresh] = index.emplace(std::make_pair(q, s), static_cast<int>(l.entries.size()));
  if (fresh)
    l.entries.push_back({q, s, 0.0, 1.0, 0.0});
  return it->second;
}

Layout make_layout(const QueueGraph& g) {
  const auto& m = g.model;
  Layout l;
  std::map<std::pair<int, int>, int> entry_index;
  std::map<std::tuple<int, int, int>, int> group_index;  // (source, parent, queue)
  std::vector<int> source_of(m.flows.size(), -1);
  for (std::size_t s = 0; s < m.sources.size(); ++s)
    for (int f : m.sources[s].flows)
      source_of[f] = static_cast<int>(s);
  l.flow_path.resize(m.flows.size());
  l.flow_entry.resize(m.flows.size());
  for (std::size_t f = 0; f < m.flows.size(); ++f) {
    const double rate = g.flow_rate[f];
    if (rate <= 0.0 || source_of[f] < 0)
      continue;
    int parent = -1;
    const auto& hops = m.flows[f].hops;
    for (std::size_t h = 0; h < hops.size(); ++h) {
      const auto key = std::make_tuple(source_of[f], parent, hops[h].queue);
      auto [it, fresh] = group_index.emplace(key, static_cast<int>(l.groups.size()));
      if (fresh) {
        Group gr;
        gr.queue = hops[h].queue;
        gr.parent = parent;
        gr.source = source_of[f];
        gr.spacing = h == 0 ? 0 : m.servers[hops[h - 1].server].service_time;
        l.groups.push_back(gr);
      }
      const int gi = it->second;
      auto& gr = l.groups[gi];
      gr.rate += rate;
      const int e = entry_of(l, entry_index, hops[h].queue, hops[h].server);
      l.entries[e].rate += rate;
      auto slot = std::find_if(gr.out.begin(), gr.out.end(),
                               [e](const auto& p) { return p.first == e; });
      if (slot == gr.out.end())
        gr.out.emplace_back(e, rate);
      else
        slot->second += rate;
      l.flow_path[f].push_back(gi);
      l.flow_entry[f].push_back(e);
      parent = gi;
    }
  }
  l.queue_groups.resize(m.queues.size());
  l.queue_entries.resize(m.queues.size());
  l.server_entries.resize(m.servers.size());
  for (std::size_t i = 0; i < l.groups.size(); ++i)
    l.queue_groups[l.groups[i].queue].push_back(static_cast<int>(i));
  for (std::size_t e = 0; e < l.entries.size(); ++e) {
    l.queue_entries[l.entries[e].queue].push_back(static_cast<int>(e));
    l.server_entries[l.entries[e].server].push_back(static_cast<int>(e));
    l.entries[e].t_hat = m.servers[l.entries[e].server].service_time;
  }
  return l;
}

double floored_burst(const MomentPair& m) {
  return m.is_null() ? 0.0 : std::max(0.0, burst_factor(m));
}

NetworkSolution solve(const QueueGraph& graph, const SolveOptions& opt, bool no_burst) {
  const auto& m = graph.model;
  Layout l = make_layout(graph);
  const std::size_t nq = m.queues.size();
  const std::size_t ng = l.groups.size();
  const std::size_t ne = l.entries.size();

  NetworkSolution sol;
  auto& diag = sol.diagnostics;
  std::vector<double> queue_rate(nq, 0.0), util_hat(nq, 0.0), queue_scv(nq, 0.0);
  for (const auto& e : l.entries) {
    queue_rate[e.queue] += e.rate;
    util_hat[e.queue] += e.rate * m.servers[e.server].service_time;
  }
  std::vector<double> source_scv(m.sources.size());
  for (std::size_t s = 0; s < m.sources.size(); ++s) {
    const auto& p = m.sources[s].process;
    source_scv[s] = scv_from_burst(p.rate(), no_burst ? 0.0 : p.burst_prob());
  }

  std::vector<double> scv(ng), t_bar(ng), beta_self(ng);
  std::vector<double> b_self(ne), b_raw(ne), b_dep(ne);
  std::vector<std::vector<double>> wait(ng), prev;
  std::vector<std::vector<QueueStream>> streams(nq);

  auto departure_of = [&](const Group& gr, double arrival_scv) {
    const int q = gr.queue;
    const double share = gr.rate / queue_rate[q];
    const double cs = share * queue_scv[q] + 1.0 - share;
    return MomentPair{gr.rate,
                      departure_scv(std::min(util_hat[q], 1.0 - 1e-9), arrival_scv, cs)};
  };

  int it = 0;
  for (;; ++it) {
    if (it >= opt.max_iterations)
      throw NonConvergenceError("network fixed point did not converge", it, sol.residual);

    // Arrival moments of every group, parents first (groups are created in
    // route order, so a parent always precedes its children).
    for (std::size_t i = 0; i < ng; ++i) {
      const auto& gr = l.groups[i];
      if (gr.parent < 0) {
        const double rate = m.sources[gr.source].process.rate();
        scv[i] = split_stream({rate, source_scv[gr.source]}, std::min(1.0, gr.rate / rate)).scv;
      } else {
        const auto& up = l.groups[gr.parent];
        const MomentPair d = departure_of(up, scv[gr.parent]);
        double c = split_stream(d, std::min(1.0, gr.rate / up.rate)).scv;
        if (c < 1.0 - gr.rate) {
          if (c < 1.0 - gr.rate - 1e-12)
            ++diag.moment_floors;
          c = 1.0 - gr.rate;
        }
        scv[i] = c;
      }
    }

    // Per-entry burst factors: own arrivals (with link serialization), raw
    // arrivals, and the departure-side view for queues feeding several
    // servers.
    std::fill(b_self.begin(), b_self.end(), 0.0);
    std::fill(b_raw.begin(), b_raw.end(), 0.0);
    std::fill(b_dep.begin(), b_dep.end(), 0.0);
    for (std::size_t i = 0; i < ng; ++i) {
      const auto& gr = l.groups[i];
      t_bar[i] = 0.0;
      for (const auto& [e, r] : gr.out)
        t_bar[i] += r / gr.rate * l.entries[e].t_hat;
      const MomentPair own{gr.rate, scv[i]};
      const double raw = floored_burst(own);
      beta_self[i] = gr.spacing > 0 ? raw * std::max(0.0, 1.0 - gr.spacing / t_bar[i]) : raw;
      for (const auto& [e, r] : gr.out) {
        const double f = r / gr.rate;
        b_self[e] += gr.rate * f * f * beta_self[i];
        b_raw[e] += gr.rate * f * f * raw;
      }
      if (l.queue_entries[gr.queue].size() > 1) {
        const MomentPair d = departure_of(gr, scv[i]);
        for (const auto& [e, r] : gr.out) {
          MomentPair v = split_stream(d, std::min(1.0, r / gr.rate));
          v.scv = std::max(v.scv, 1.0 - r);
          b_dep[e] += r * floored_burst(v);
        }
      }
    }
    for (std::size_t e = 0; e < ne; ++e) {
      b_self[e] /= l.entries[e].rate;
      b_raw[e] /= l.entries[e].rate;
      b_dep[e] /= l.entries[e].rate;
    }

    // Decompose every server into its virtual single-server queues.
    for (std::size_t s = 0; s < l.server_entries.size(); ++s) {
      const auto& ins = l.server_entries[s];
      if (ins.empty())
        continue;
      std::vector<Contender> cs;
      for (int e : ins) {
        const auto& en = l.entries[e];
        const bool shared = l.queue_entries[en.queue].size() > 1;
        cs.push_back({en.rate, m.servers[s].service_time, 0.0, m.queues[en.queue].rank, b_self[e],
                      shared ? b_dep[e] : b_raw[e]});
      }
      ServerDecomposition dec;
      try {
        dec = decompose_server(cs, diag);
      } catch (const InstabilityError& err) {
        throw InstabilityError(std::string(err.what()) + " at server '" + m.servers[s].label + "'",
                               m.servers[s].label);
      }
      for (std::size_t k = 0; k < ins.size(); ++k) {
        l.entries[ins[k]].t_hat = dec.inputs[k].modified.t_hat;
        l.entries[ins[k]].scv_hat = dec.inputs[k].modified.scv_hat;
      }
    }

    // Queue-level waits over the modified services.
    for (std::size_t q = 0; q < nq; ++q) {
      const auto& gs = l.queue_groups[q];
      if (gs.empty())
        continue;
      auto& st = streams[q];
      st.clear();
      for (int i : gs) {
        const auto& gr = l.groups[i];
        QueueStream s{{gr.rate, scv[i]}, gr.spacing, {}};
        for (const auto& [e, r] : gr.out)
          s.classes.push_back({r / gr.rate, m.servers[l.entries[e].server].service_time,
                               l.entries[e].t_hat, l.entries[e].scv_hat});
        st.push_back(std::move(s));
      }
      QueueWaiting w;
      try {
        w = queue_waiting_time(st, &diag);
      } catch (const InstabilityError&) {
        throw InstabilityError("queue '" + m.queues[q].label + "' modified utilization >= 1",
                               m.queues[q].label);
      }
      util_hat[q] = w.util_hat;
      queue_scv[q] = w.service_scv;
      for (std::size_t k = 0; k < gs.size(); ++k)
        wait[gs[k]] = std::move(w.waiting[k]);
    }

    double change = 0.0;
    if (!prev.empty())
      for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t k = 0; k < wait[i].size(); ++k) {
          const double a = wait[i][k], b = prev[i][k];
          change = std::max(change, std::abs(a) > 1e-6 ? std::abs(a - b) / std::abs(a)
                                                        : std::abs(a - b));
        }
    sol.residual = prev.empty() ? 0.0 : change;
    if (!prev.empty() && change < opt.tolerance)
      break;
    prev = wait;
  }
  sol.iterations = it + 1;

  // Reports.
  sol.queues.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    auto& r = sol.queues[q];
    r.label = m.queues[q].label;
    r.rank = m.queues[q].rank;
    r.rate = queue_rate[q];
    r.util_hat = l.queue_groups[q].empty() ? 0.0 : util_hat[q];
    r.service_scv = queue_scv[q];
  }
  std::vector<double> weighted(nq, 0.0);
  for (std::size_t f = 0; f < m.flows.size(); ++f) {
    const auto& hops = m.flows[f].hops;
    FlowResult fr;
    fr.src = m.flows[f].src;
    fr.dst = m.flows[f].dst;
    fr.rate = graph.flow_rate[f];
    for (std::size_t h = 0; h < hops.size(); ++h) {
      double w = 0.0;
      if (!l.flow_path[f].empty()) {
        const auto& gr = l.groups[l.flow_path[f][h]];
        const int e = l.flow_entry[f][h];
        for (std::size_t k = 0; k < gr.out.size(); ++k)
          if (gr.out[k].first == e)
            w = wait[l.flow_path[f][h]][k];
      }
      fr.hop_wait.push_back(w);
      fr.latency += w + m.servers[hops[h].server].service_time + m.link_latency;
      sol.classes.push_back({static_cast<int>(f), hops[h].queue, hops[h].server, fr.rate, w});
      weighted[hops[h].queue] += fr.rate * w;
    }
    sol.flows.push_back(std::move(fr));
  }
  for (std::size_t q = 0; q < nq; ++q)
    if (queue_rate[q] > 0.0)
      sol.queues[q].waiting = weighted[q] / queue_rate[q];
  return sol;
}

} // namespace

NetworkSolution solve_network(const QueueGraph& graph, const SolveOptions& options) {
  return solve(graph, options, false);
}

NetworkSolution no_burst_baseline(const QueueGraph& graph, const SolveOptions& options) {
  return solve(graph, options, true);
}

} // namespace nocperf

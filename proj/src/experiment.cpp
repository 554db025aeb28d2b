#include "nocperf/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "nocperf/error.hpp"

namespace nocperf {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key))
    return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok)
    throw ConfigError(what);
}

bool valid_rate(double r) { return r >= 0.0 && r <= 1.0; }
bool valid_pb(double p) { return p >= 0.0 && p < 1.0; }

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "config",
             {"topology", "routing", "traffic", "service_time", "link_latency", "simulation",
              "sweep"});
  if (j.contains("topology")) {
    const auto& t = j["topology"];
    check_keys(t, "topology", {"kind", "nodes", "width", "height"});
    read(t, "kind", c.topology, "topology");
    read(t, "nodes", c.nodes, "topology");
    read(t, "width", c.width, "topology");
    read(t, "height", c.height, "topology");
  }
  read(j, "routing", c.routing, "config");
  if (j.contains("traffic")) {
    const auto& t = j["traffic"];
    check_keys(t, "traffic", {"pattern", "rate", "burst_prob", "flows"});
    read(t, "pattern", c.pattern, "traffic");
    read(t, "rate", c.rate, "traffic");
    read(t, "burst_prob", c.burst_prob, "traffic");
    if (t.contains("flows")) {
      require(t["flows"].is_array(), "traffic.flows must be an array");
      for (const auto& f : t["flows"]) {
        check_keys(f, "traffic.flows[]", {"src", "dst", "rate", "burst_prob"});
        FlowConfig fc;
        fc.rate = c.rate;
        fc.burst_prob = c.burst_prob;
        read(f, "src", fc.src, "flow");
        read(f, "dst", fc.dst, "flow");
        read(f, "rate", fc.rate, "flow");
        read(f, "burst_prob", fc.burst_prob, "flow");
        c.flows.push_back(fc);
      }
    }
  }
  read(j, "service_time", c.service_time, "config");
  read(j, "link_latency", c.link_latency, "config");
  if (j.contains("simulation")) {
    const auto& s = j["simulation"];
    check_keys(s, "simulation", {"seed", "warmup", "measure"});
    read(s, "seed", c.seed, "simulation");
    read(s, "warmup", c.warmup, "simulation");
    read(s, "measure", c.measure, "simulation");
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, "sweep", {"rates", "burst_probs", "simulate"});
    read(s, "rates", c.sweep_rates, "sweep");
    read(s, "burst_probs", c.sweep_burst_probs, "sweep");
    read(s, "simulate", c.sweep_simulate, "sweep");
  }

  require(c.topology == "ring" || c.topology == "mesh", "topology.kind must be ring or mesh");
  if (c.topology == "ring")
    require(c.nodes >= 2, "ring needs nodes >= 2");
  else
    require(c.width >= 2 && c.height >= 2, "mesh needs width, height >= 2");
  require(c.routing == "default" ||
              (c.topology == "ring" && c.routing == "shortest_arc") ||
              (c.topology == "mesh" && c.routing == "yx"),
          "routing '" + c.routing + "' is not available for a " + c.topology);
  require(c.pattern == "uniform" || c.pattern == "explicit",
          "traffic.pattern must be uniform or explicit");
  require(valid_rate(c.rate), "traffic.rate must lie in [0, 1]");
  require(valid_pb(c.burst_prob), "traffic.burst_prob must lie in [0, 1)");
  if (c.pattern == "explicit") {
    require(!c.flows.empty(), "explicit traffic needs at least one flow");
    const int n = c.make_topology().nodes();
    for (const auto& f : c.flows) {
      require(f.src >= 0 && f.src < n && f.dst >= 0 && f.dst < n, "flow node out of range");
      require(f.src != f.dst, "flow source equals destination");
      require(valid_rate(f.rate) && f.rate > 0.0, "flow rate must lie in (0, 1]");
      require(valid_pb(f.burst_prob), "flow burst_prob must lie in [0, 1)");
    }
  } else {
    require(c.flows.empty(), "traffic.flows is only valid with the explicit pattern");
  }
  require(c.service_time >= 1, "service_time must be >= 1");
  require(c.link_latency >= 0, "link_latency must be >= 0");
  require(c.measure >= 1, "simulation.measure must be >= 1");
  for (double r : c.sweep_rates)
    require(valid_rate(r), "sweep rates must lie in [0, 1]");
  for (double p : c.sweep_burst_probs)
    require(valid_pb(p), "sweep burst_probs must lie in [0, 1)");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["topology"]["kind"] = topology;
  if (topology == "ring") {
    j["topology"]["nodes"] = nodes;
  } else {
    j["topology"]["width"] = width;
    j["topology"]["height"] = height;
  }
  j["routing"] = routing;
  j["traffic"]["pattern"] = pattern;
  j["traffic"]["rate"] = rate;
  j["traffic"]["burst_prob"] = burst_prob;
  if (pattern == "explicit") {
    ordered_json fl = ordered_json::array();
    for (const auto& f : flows)
      fl.push_back({{"src", f.src}, {"dst", f.dst}, {"rate", f.rate}, {"burst_prob", f.burst_prob}});
    j["traffic"]["flows"] = fl;
  }
  j["service_time"] = service_time;
  j["link_latency"] = link_latency;
  j["simulation"]["seed"] = seed;
  j["simulation"]["warmup"] = warmup;
  j["simulation"]["measure"] = measure;
  j["sweep"]["rates"] = sweep_rates;
  j["sweep"]["burst_probs"] = sweep_burst_probs;
  j["sweep"]["simulate"] = sweep_simulate;
  return j;
}

Topology ExperimentConfig::make_topology() const {
  return topology == "ring" ? Topology::ring(nodes) : Topology::mesh(width, height);
}

TrafficPattern ExperimentConfig::make_pattern(double r, double pb) const {
  TrafficPattern p;
  p.rate = r;
  p.burst_prob = pb;
  if (pattern == "explicit") {
    p.kind = TrafficPattern::Kind::explicit_flows;
    for (const auto& f : flows)
      p.flows.push_back({f.src, f.dst, GGeoProcess(f.rate, f.burst_prob)});
  }
  return p;
}

SimOptions ExperimentConfig::sim_options() const {
  SimOptions o;
  o.seed = seed;
  o.warmup = warmup;
  o.measure = measure;
  return o;
}

std::string ExperimentConfig::topology_name() const { return make_topology().name(); }

std::vector<std::pair<double, double>> ExperimentConfig::grid() const {
  const std::vector<double> rates = sweep_rates.empty() ? std::vector<double>{rate} : sweep_rates;
  const std::vector<double> pbs =
      sweep_burst_probs.empty() ? std::vector<double>{burst_prob} : sweep_burst_probs;
  std::vector<std::pair<double, double>> out;
  for (double pb : pbs)
    for (double r : rates)
      out.emplace_back(r, pb);
  return out;
}

AnalysisReport analyze(const ExperimentConfig& config, double rate, double burst_prob,
                       bool baseline) {
  AnalysisReport r;
  r.graph = build_queue_graph(config.make_topology(), config.make_pattern(rate, burst_prob),
                              config.service_time, config.link_latency);
  classify_structures(r.graph);
  const auto t0 = std::chrono::steady_clock::now();
  r.solution = baseline ? no_burst_baseline(r.graph) : solve_network(r.graph);
  r.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

AnalysisReport analyze(const ExperimentConfig& config, bool baseline) {
  return analyze(config, config.rate, config.burst_prob, baseline);
}

SimReport simulate(const ExperimentConfig& config, double rate, double burst_prob) {
  const auto model = build_sim_model(config.make_topology(), config.make_pattern(rate, burst_prob),
                                     config.service_time, config.link_latency);
  return run_simulation(model, config.sim_options());
}

std::optional<double> ComparisonRow::error_pct() const {
  if (!analytic || !simulated || *simulated <= 0.0)
    return std::nullopt;
  return std::abs(*analytic - *simulated) / *simulated * 100.0;
}

std::optional<double> ComparisonRow::baseline_error_pct() const {
  if (!baseline || !simulated || *simulated <= 0.0)
    return std::nullopt;
  return (*baseline - *simulated) / *simulated * 100.0;
}

namespace {

std::optional<double> try_latency(const ExperimentConfig& c, double r, double pb, bool baseline,
                                  std::string& note) {
  try {
    return analyze(c, r, pb, baseline).solution.mean_latency();
  } catch (const InstabilityError& e) {
    note += std::string(note.empty() ? "" : "; ") + (baseline ? "baseline" : "analytic") +
            " unstable at " + (e.where().empty() ? std::string("?") : e.where());
  } catch (const NonConvergenceError&) {
    note += std::string(note.empty() ? "" : "; ") + (baseline ? "baseline" : "analytic") +
            " did not converge";
  }
  return std::nullopt;
}

std::optional<double> try_simulation(const ExperimentConfig& c, double r, double pb,
                                     std::string& note) {
  const auto rep = simulate(c, r, pb);
  if (rep.saturated) {
    note += std::string(note.empty() ? "" : "; ") + "simulation saturated";
    return std::nullopt;
  }
  return rep.mean_latency();
}

// Runs body(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace

ComparisonRow compare_point(const ExperimentConfig& config, double rate, double burst_prob) {
  ComparisonRow row;
  row.topology = config.topology_name();
  row.rate = rate;
  row.burst_prob = burst_prob;
  row.analytic = try_latency(config, rate, burst_prob, false, row.note);
  row.baseline = try_latency(config, rate, burst_prob, true, row.note);
  row.simulated = try_simulation(config, rate, burst_prob, row.note);
  return row;
}

std::vector<ComparisonRow> compare(const ExperimentConfig& config, int jobs) {
  const auto g = config.grid();
  std::vector<ComparisonRow> rows(g.size());
  parallel_for(g.size(), jobs,
               [&](std::size_t i) { rows[i] = compare_point(config, g[i].first, g[i].second); });
  return rows;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, int jobs) {
  const auto g = config.grid();
  const std::size_t per = config.sweep_simulate ? 3 : 2;
  std::vector<SweepRow> rows(g.size() * per);
  parallel_for(g.size(), jobs, [&](std::size_t i) {
    const auto [r, pb] = g[i];
    std::string note;
    const std::string topo = config.topology_name();
    rows[i * per] = {topo, pb, r, "analytic", try_latency(config, r, pb, false, note)};
    rows[i * per + 1] = {topo, pb, r, "baseline", try_latency(config, r, pb, true, note)};
    if (config.sweep_simulate)
      rows[i * per + 2] = {topo, pb, r, "simulation", try_simulation(config, r, pb, note)};
  });
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {

std::string opt_cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

ordered_json opt_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s)
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

} // namespace

ordered_json analysis_json(const AnalysisReport& r, const ExperimentConfig& config, bool baseline,
                           bool with_timing) {
  const auto& s = r.solution;
  ordered_json j;
  j["config"] = config.to_json();
  j["model"] = baseline ? "no-burst" : "analytic";
  j["mean_latency"] = s.mean_latency();
  j["iterations"] = s.iterations;
  j["residual"] = s.residual;
  j["diagnostics"] = {{"scv_floors", s.diagnostics.scv_floors},
                      {"p_zero_clamps", s.diagnostics.p_zero_clamps},
                      {"wait_floors", s.diagnostics.wait_floors},
                      {"moment_floors", s.diagnostics.moment_floors}};
  if (with_timing)
    j["wall_ms"] = r.wall_ms;
  ordered_json qs = ordered_json::array();
  for (const auto& q : s.queues) {
    if (q.rate <= 0.0)
      continue;
    qs.push_back({{"queue", q.label}, {"rank", q.rank}, {"rate", q.rate}, {"waiting", q.waiting},
                  {"util_hat", q.util_hat}});
  }
  j["queues"] = qs;
  ordered_json fs = ordered_json::array();
  for (const auto& f : s.flows)
    fs.push_back({{"src", f.src}, {"dst", f.dst}, {"rate", f.rate}, {"latency", f.latency},
                  {"hop_wait", f.hop_wait}});
  j["flows"] = fs;
  ordered_json is = ordered_json::array();
  for (const auto& x : r.graph.interactions)
    is.push_back({{"server", r.graph.model.servers[x.server].label},
                  {"high", r.graph.model.queues[x.high_queue].label},
                  {"low", r.graph.model.queues[x.low_queue].label},
                  {"equal_rank", x.equal_rank},
                  {"kind", std::string(interaction_name(x.kind))}});
  j["structures"] = is;
  return j;
}

std::string analysis_csv(const AnalysisReport& r) {
  std::ostringstream out;
  out << "kind,id,src,dst,rate,value\n";
  for (const auto& f : r.solution.flows)
    out << "flow_latency,," << f.src << ',' << f.dst << ',' << format_number(f.rate) << ','
        << format_number(f.latency) << '\n';
  for (const auto& q : r.solution.queues)
    if (q.rate > 0.0)
      out << "queue_wait," << q.label << ",,," << format_number(q.rate) << ','
          << format_number(q.waiting) << '\n';
  return out.str();
}

ordered_json simulation_json(const SimReport& r) {
  ordered_json j;
  j["seed"] = r.seed;
  j["warmup"] = r.warmup;
  j["measure"] = r.measure;
  j["end_cycle"] = r.end_cycle;
  j["saturated"] = r.saturated;
  j["warnings"] = r.warnings;
  j["mean_latency"] = r.mean_latency();
  ordered_json qs = ordered_json::array();
  for (const auto& q : r.queues) {
    if (q.arrivals.count == 0)
      continue;
    qs.push_back({{"queue", q.label},
                  {"rank", q.rank},
                  {"mean_wait", q.mean_wait},
                  {"mean_occupancy", q.mean_occupancy},
                  {"busy_fraction", q.busy_fraction},
                  {"arrival_rate", q.arrivals.rate},
                  {"arrival_scv", q.arrivals.scv},
                  {"departure_rate", q.departures.rate},
                  {"departure_scv", q.departures.scv}});
  }
  j["queues"] = qs;
  ordered_json fs = ordered_json::array();
  for (const auto& f : r.flows)
    fs.push_back({{"src", f.src},
                  {"dst", f.dst},
                  {"injected", f.injected},
                  {"delivered", f.delivered},
                  {"measured", f.measured},
                  {"mean_latency", f.mean_latency},
                  {"p50", f.p50},
                  {"p95", f.p95},
                  {"p99", f.p99},
                  {"hop_wait", f.hop_wait}});
  j["flows"] = fs;
  return j;
}

std::string simulation_csv(const SimReport& r) {
  std::ostringstream out;
  out << "src,dst,measured,mean_latency,p50,p95,p99\n";
  for (const auto& f : r.flows)
    out << f.src << ',' << f.dst << ',' << f.measured << ',' << format_number(f.mean_latency)
        << ',' << format_number(f.p50) << ',' << format_number(f.p95) << ','
        << format_number(f.p99) << '\n';
  return out.str();
}

ordered_json comparison_json(const std::vector<ComparisonRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"topology", r.topology},
                   {"p_b", r.burst_prob},
                   {"lambda", r.rate},
                   {"analytic", opt_json(r.analytic)},
                   {"simulated", opt_json(r.simulated)},
                   {"error_pct", opt_json(r.error_pct())},
                   {"baseline", opt_json(r.baseline)},
                   {"baseline_error_pct", opt_json(r.baseline_error_pct())},
                   {"note", r.note}});
  return arr;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "topology,p_b,lambda,analytic,simulated,error_pct,baseline,baseline_error_pct,note\n";
  // Errors are taken from the printed latencies so the columns agree exactly.
  auto printed = [](const std::optional<double>& v) -> std::optional<double> {
    if (!v)
      return v;
    return std::stod(format_number(*v));
  };
  for (const auto& raw : rows) {
    ComparisonRow r = raw;
    r.analytic = printed(r.analytic);
    r.simulated = printed(r.simulated);
    r.baseline = printed(r.baseline);
    out << r.topology << ',' << format_number(r.burst_prob) << ',' << format_number(r.rate) << ','
        << opt_cell(r.analytic) << ',' << opt_cell(r.simulated) << ',' << opt_cell(r.error_pct())
        << ',' << opt_cell(r.baseline) << ',' << opt_cell(r.baseline_error_pct()) << ','
        << csv_escape(r.note) << '\n';
  }
  return out.str();
}

ordered_json sweep_json(const std::vector<SweepRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"topology", r.topology},
                   {"p_b", r.burst_prob},
                   {"lambda", r.rate},
                   {"model", r.model},
                   {"latency", opt_json(r.latency)}});
  return arr;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "topology,p_b,lambda,model,latency\n";
  for (const auto& r : rows)
    out << r.topology << ',' << format_number(r.burst_prob) << ',' << format_number(r.rate) << ','
        << r.model << ',' << opt_cell(r.latency) << '\n';
  return out.str();
}

} // namespace nocperf

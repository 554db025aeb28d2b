// nocperf command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 instability,
// 4 non-convergence, 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nocperf/error.hpp"
#include "nocperf/experiment.hpp"
#include "nocperf/traceburst.hpp"

using namespace nocperf;
namespace fs = std::filesystem;

namespace {

enum class Level { quiet, warn, info, debug };

Level log_level() {
  const char* v = std::getenv("NOCPERF_LOG");
  if (!v)
    return Level::warn;
  const std::string s = v;
  if (s == "quiet" || s == "0")
    return Level::quiet;
  if (s == "info" || s == "2")
    return Level::info;
  if (s == "debug" || s == "3")
    return Level::debug;
  return Level::warn;
}

void log(Level at, const std::string& msg) {
  static const Level level = log_level();
  if (at <= level && level != Level::quiet)
    std::cerr << "nocperf: " << msg << '\n';
}

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string baseline;
  std::string format = "json";
  int jobs = 1;
  bool timing = false;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty())
    cfg = ExperimentConfig::load(c.config_path);
  if (c.seed)
    cfg.seed = *c.seed;
  if (!c.baseline.empty() && c.baseline != "no-burst")
    throw ConfigError("--baseline accepts only 'no-burst'");
  return cfg;
}

// Writes to <out>/<name>.<ext> when --out is set, stdout otherwise.
void emit(const Common& c, const std::string& name, const std::string& text,
          const ExperimentConfig* cfg) {
  if (c.out_dir.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(c.out_dir);
  const fs::path file = fs::path(c.out_dir) / (name + "." + c.format);
  std::ofstream(file) << text;
  if (cfg)
    std::ofstream(fs::path(c.out_dir) / "resolved_config.json") << cfg->to_json().dump(2) << '\n';
  log(Level::info, "wrote " + file.string());
}

void check_format(const Common& c) {
  if (c.format != "json" && c.format != "csv")
    throw ConfigError("--format must be csv or json");
}

void report_diagnostics(const NetworkSolution& s) {
  const auto& d = s.diagnostics;
  log(Level::info, "converged in " + std::to_string(s.iterations) + " iterations");
  if (d.total() > 0)
    log(Level::debug, "clamps: scv " + std::to_string(d.scv_floors) + ", p0 " +
                          std::to_string(d.p_zero_clamps) + ", wait " +
                          std::to_string(d.wait_floors) + ", moments " +
                          std::to_string(d.moment_floors));
}

int cmd_analyze(const Common& c) {
  check_format(c);
  const auto cfg = load_config(c);
  const bool baseline = c.baseline == "no-burst";
  const auto r = analyze(cfg, baseline);
  report_diagnostics(r.solution);
  log(Level::info, "solve took " + format_number(r.wall_ms) + " ms");
  const std::string text = c.format == "csv"
                               ? analysis_csv(r)
                               : analysis_json(r, cfg, baseline, c.timing).dump(2) + "\n";
  emit(c, "analyze", text, &cfg);
  return 0;
}

int cmd_simulate(const Common& c, const std::string& trace_path) {
  check_format(c);
  const auto cfg = load_config(c);
  const auto model = build_sim_model(cfg.make_topology(), cfg.make_pattern(), cfg.service_time,
                                     cfg.link_latency);
  auto opt = cfg.sim_options();
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path);
    if (!trace)
      throw ConfigError("cannot write trace '" + trace_path + "'");
    opt.trace = &trace;
  }
  const auto rep = run_simulation(model, opt);
  for (const auto& w : rep.warnings)
    log(Level::warn, w);
  const std::string text =
      c.format == "csv" ? simulation_csv(rep) : simulation_json(rep).dump(2) + "\n";
  emit(c, "simulate", text, &cfg);
  return 0;
}

int cmd_compare(const Common& c) {
  check_format(c);
  const auto cfg = load_config(c);
  const auto rows = compare(cfg, c.jobs);
  for (const auto& r : rows)
    if (!r.note.empty())
      log(Level::warn, cfg.topology_name() + " p_b=" + format_number(r.burst_prob) +
                           " lambda=" + format_number(r.rate) + ": " + r.note);
  const std::string text =
      c.format == "csv" ? comparison_csv(rows) : comparison_json(rows).dump(2) + "\n";
  emit(c, "compare", text, &cfg);
  return 0;
}

int cmd_sweep(const Common& c) {
  check_format(c);
  const auto cfg = load_config(c);
  const auto rows = sweep(cfg, c.jobs);
  const std::string text = c.format == "csv" ? sweep_csv(rows) : sweep_json(rows).dump(2) + "\n";
  emit(c, "sweep", text, &cfg);
  return 0;
}

int cmd_estimate(const Common& c, const std::string& trace_path, const BurstOptions& opt) {
  check_format(c);
  const auto events = load_trace(trace_path);
  const auto est = estimate_burstiness(events, opt);
  int flagged = 0;
  for (const auto& e : est)
    flagged += e.flag != EstimateFlag::ok;
  if (flagged)
    log(Level::info, std::to_string(flagged) + " window estimates flagged");
  std::string text;
  if (c.format == "json") {
    text = estimates_to_json(est);
  } else {
    text = "window,src,dst,rate,occupancy,arrival_scv,burst_prob,flag\n";
    for (const auto& e : est)
      text += std::to_string(e.window) + "," + std::to_string(e.key.src) + "," +
              (e.key.dst >= 0 ? std::to_string(e.key.dst) : std::string()) + "," +
              format_number(e.rate) + "," + format_number(e.occupancy) + "," +
              format_number(e.arrival_scv) + "," + format_number(e.burst_prob) + "," +
              std::string(flag_name(e.flag)) + "\n";
  }
  emit(c, "estimate", text, nullptr);
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
  if (with_config)
    sub->add_option("--config", c.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out_dir, "Output directory (default: stdout)");
  sub->add_option("--format", c.format, "csv or json")->capture_default_str();
  if (with_config) {
    sub->add_option("--seed", c.seed, "Override simulation.seed");
    sub->add_option("--jobs", c.jobs, "Worker threads for grid points")->capture_default_str();
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency analysis of priority-arbitrated NoCs under bursty traffic"};
  app.require_subcommand(1);
  Common c;
  std::string trace_path;
  BurstOptions burst;

  auto* an = app.add_subcommand("analyze", "Analytic per-flow and per-queue latencies");
  add_common(an, c);
  an->add_option("--baseline", c.baseline, "no-burst: force p_b = 0");
  an->add_flag("--timing", c.timing, "Include solve wall-time in the report");

  auto* sim = app.add_subcommand("simulate", "Cycle-accurate simulation");
  add_common(sim, c);
  sim->add_option("--trace", trace_path, "Write a cycle,src,dst injection trace");

  auto* cmp = app.add_subcommand("compare", "Analytic vs simulation vs no-burst baseline");
  add_common(cmp, c);

  auto* sw = app.add_subcommand("sweep", "Latency along the sweep axes, long format");
  add_common(sw, c);

  auto* est = app.add_subcommand("estimate-burst", "Per-window rate and burst probability");
  add_common(est, c, false);
  est->add_option("trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--window", burst.window_len, "Window length in cycles")->capture_default_str();
  est->add_option("--service-time", burst.service_time, "Virtual queue service time")
      ->capture_default_str();
  est->add_flag("--per-flow", burst.per_flow, "Estimate per (src, dst) instead of per source");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*an)
      return cmd_analyze(c);
    if (*sim)
      return cmd_simulate(c, trace_path);
    if (*cmp)
      return cmd_compare(c);
    if (*sw)
      return cmd_sweep(c);
    if (*est)
      return cmd_estimate(c, trace_path, burst);
  } catch (const ConfigError& e) {
    std::cerr << "nocperf: config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "nocperf: config error: " << e.what() << '\n';
    return 2;
  } catch (const InstabilityError& e) {
    std::cerr << "nocperf: unstable: " << e.what() << '\n';
    return 3;
  } catch (const NonConvergenceError& e) {
    std::cerr << "nocperf: no convergence after " << e.iterations() << " iterations: "
              << e.what() << '\n';
    return 4;
  } catch (const ModelBreakdownError& e) {
    std::cerr << "nocperf: model breakdown: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "nocperf: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nocperf/network.hpp"
#include "nocperf/simulator.hpp"
#include "nocperf/topology.hpp"

namespace nocperf {

struct FlowConfig {
  int src = 0;
  int dst = 1;
  double rate = 0.1;
  double burst_prob = 0.0;
};

struct ExperimentConfig {
  std::string topology = "ring";  // ring | mesh
  int nodes = 6;                  // ring
  int width = 4;                  // mesh
  int height = 4;
  std::string routing = "default";  // default | shortest_arc (ring) | yx (mesh)
  std::string pattern = "uniform";  // uniform | explicit
  double rate = 0.1;
  double burst_prob = 0.0;
  std::vector<FlowConfig> flows;
  int service_time = 1;
  int link_latency = 1;
  std::uint64_t seed = 1;
  std::uint64_t warmup = 200000;
  std::uint64_t measure = 2000000;
  std::vector<double> sweep_rates;
  std::vector<double> sweep_burst_probs;
  bool sweep_simulate = false;

  /// Strict: unknown keys and out-of-range values raise ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  /// Every field, defaults included.
  nlohmann::ordered_json to_json() const;

  Topology make_topology() const;
  TrafficPattern make_pattern(double rate, double burst_prob) const;
  TrafficPattern make_pattern() const { return make_pattern(rate, burst_prob); }
  SimOptions sim_options() const;
  std::string topology_name() const;
  /// (rate, burst_prob) grid of the sweep axes; a missing axis falls back
  /// to the single configured value. Rates vary fastest.
  std::vector<std::pair<double, double>> grid() const;
};

struct AnalysisReport {
  NetworkSolution solution;
  QueueGraph graph;
  double wall_ms = 0.0;
};

AnalysisReport analyze(const ExperimentConfig& config, bool baseline = false);
AnalysisReport analyze(const ExperimentConfig& config, double rate, double burst_prob,
                       bool baseline = false);
SimReport simulate(const ExperimentConfig& config, double rate, double burst_prob);

struct ComparisonRow {
  std::string topology;
  double burst_prob = 0.0;
  double rate = 0.0;
  std::optional<double> analytic;   // empty when the model reports instability
  std::optional<double> simulated;  // empty when the simulation saturates
  std::optional<double> baseline;
  std::string note;

  /// |analytic - simulated| / simulated * 100.
  std::optional<double> error_pct() const;
  /// (baseline - simulated) / simulated * 100; negative = underestimate.
  std::optional<double> baseline_error_pct() const;
};

ComparisonRow compare_point(const ExperimentConfig& config, double rate, double burst_prob);
/// One row per grid point, in grid order regardless of `jobs`.
std::vector<ComparisonRow> compare(const ExperimentConfig& config, int jobs = 1);

struct SweepRow {
  std::string topology;
  double burst_prob = 0.0;
  double rate = 0.0;
  std::string model;  // analytic | baseline | simulation
  std::optional<double> latency;
};

std::vector<SweepRow> sweep(const ExperimentConfig& config, int jobs = 1);

// ---- emitters ---------------------------------------------------------------

std::string format_number(double v);

nlohmann::ordered_json analysis_json(const AnalysisReport& report,
                                     const ExperimentConfig& config, bool baseline,
                                     bool with_timing);
std::string analysis_csv(const AnalysisReport& report);
nlohmann::ordered_json simulation_json(const SimReport& report);
std::string simulation_csv(const SimReport& report);
nlohmann::ordered_json comparison_json(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
nlohmann::ordered_json sweep_json(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);

} // namespace nocperf

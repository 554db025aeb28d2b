#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace nocperf {

/// First two moments of a discrete-time arrival stream: rate in flits per
/// cycle and squared coefficient of variation of the interarrival time.
/// A zero rate denotes a null stream whose scv is ignored.
struct MomentPair {
  double rate = 0.0;
  double scv = 0.0;

  bool is_null() const noexcept { return rate <= 0.0; }
  friend bool operator==(const MomentPair&, const MomentPair&) = default;
};

// C_a^2 = 2/(1 - p_b) - lambda - 1
double scv_from_burst(double rate, double burst_prob);

// Inverse of scv_from_burst. Throws DomainError when scv < 1 - rate (the
// stream is smoother than Bernoulli and has no GGeo representation).
double burst_from_scv(double rate, double scv);

/// Mean number of extra same-slot arrivals, (scv + rate - 1)/2. Equals
/// p_b/(1 - p_b) for a GGeo stream.
double burst_factor(double rate, double scv);
inline double burst_factor(const MomentPair& m) { return burst_factor(m.rate, m.scv); }

/// Bernoulli thinning: each flit is kept independently with keep_prob.
MomentPair split_stream(const MomentPair& in, double keep_prob);

/// Interdeparture scv of a single-server queue, interpolating between the
/// arrival process (empty server) and the service process (saturated).
double departure_scv(double utilization, double arrival_scv, double service_scv);

/// Generalized geometric arrival process. Immutable.
class GGeoProcess {
public:
  GGeoProcess(double rate, double burst_prob);

  double rate() const noexcept { return rate_; }
  double burst_prob() const noexcept { return burst_prob_; }
  double scv() const noexcept { return scv_; }
  MomentPair moments() const noexcept { return {rate_, scv_}; }
  // Per-slot firing probability of the geometric branch.
  double slot_prob() const noexcept { return rate_ * (1.0 - burst_prob_); }

private:
  double rate_;
  double burst_prob_;
  double scv_;
};

/// Draws interarrival gaps: 0 with probability p_b (same-slot bulk arrival),
/// otherwise Geometric(lambda (1 - p_b)) on {1, 2, ...}.
class GGeoSampler {
public:
  GGeoSampler(const GGeoProcess& process, std::uint64_t seed);

  std::uint64_t next_gap();
  // Uniform in [0, 1). Exposed so owners can draw auxiliary choices from
  // the same deterministic stream.
  double uniform();

private:
  double burst_prob_;
  double slot_prob_;
  double log_miss_;  // log(1 - slot_prob), 0 when slot_prob == 1
  std::mt19937_64 rng_;
};

std::vector<std::uint64_t> sample_interarrivals(const GGeoProcess& process, std::uint64_t seed,
                                                std::size_t count);

/// Mean and scv of a gap sequence. Accumulates in long double.
struct GapMoments {
  double mean = 0.0;
  double scv = 0.0;
  std::size_t count = 0;
};
GapMoments gap_moments(const std::vector<std::uint64_t>& gaps);

} // namespace nocperf

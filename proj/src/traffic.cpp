#include "nocperf/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nocperf/error.hpp"

namespace nocperf {

namespace {

void check_rate(double rate) {
  if (!(rate > 0.0 && rate <= 1.0))
    throw DomainError("rate must lie in (0, 1], got " + std::to_string(rate));
}

void check_burst(double burst_prob) {
  if (!(burst_prob >= 0.0 && burst_prob < 1.0))
    throw DomainError("burst probability must lie in [0, 1), got " + std::to_string(burst_prob));
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw DomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(p));
}

} // namespace

double scv_from_burst(double rate, double burst_prob) {
  check_rate(rate);
  check_burst(burst_prob);
  return 2.0 / (1.0 - burst_prob) - rate - 1.0;
}

double burst_from_scv(double rate, double scv) {
  check_rate(rate);
  // Tolerates rounding from scv_from_burst(rate, 0).
  if (!(scv >= 1.0 - rate - 1e-12))
    throw DomainError("scv " + std::to_string(scv) + " below the Bernoulli floor 1 - rate = " +
                      std::to_string(1.0 - rate));
  return std::max(0.0, 1.0 - 2.0 / (scv + rate + 1.0));
}

double burst_factor(double rate, double scv) {
  if (rate < 0.0 || scv < 0.0)
    throw DomainError("moment pair must be nonnegative");
  if (rate == 0.0)
    return 0.0;
  return 0.5 * (scv + rate - 1.0);
}

MomentPair split_stream(const MomentPair& in, double keep_prob) {
  check_prob(keep_prob, "keep probability");
  if (keep_prob == 0.0 || in.is_null())
    return {0.0, 0.0};
  return {keep_prob * in.rate, keep_prob * in.scv + 1.0 - keep_prob};
}

double departure_scv(double utilization, double arrival_scv, double service_scv) {
  if (!(utilization >= 0.0 && utilization < 1.0))
    throw DomainError("departure_scv needs utilization in [0, 1), got " +
                      std::to_string(utilization));
  const double rho2 = utilization * utilization;
  return (1.0 - rho2) * arrival_scv + rho2 * service_scv;
}

GGeoProcess::GGeoProcess(double rate, double burst_prob)
    : rate_(rate), burst_prob_(burst_prob), scv_(scv_from_burst(rate, burst_prob)) {}

GGeoSampler::GGeoSampler(const GGeoProcess& process, std::uint64_t seed)
    : burst_prob_(process.burst_prob()), slot_prob_(process.slot_prob()),
      log_miss_(process.slot_prob() < 1.0 ? std::log1p(-process.slot_prob()) : 0.0), rng_(seed) {}

double GGeoSampler::uniform() {
  // 53 random mantissa bits; portable unlike std::uniform_real_distribution.
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

std::uint64_t GGeoSampler::next_gap() {
  if (burst_prob_ > 0.0 && uniform() < burst_prob_)
    return 0;
  if (slot_prob_ >= 1.0)
    return 1;
  // Inverse CDF of Geometric on {1, 2, ...}: P(G > k) = (1 - s)^k.
  const double u = 1.0 - uniform();  // (0, 1]
  const double k = std::ceil(std::log(u) / log_miss_);
  return k < 1.0 ? 1 : static_cast<std::uint64_t>(k);
}

std::vector<std::uint64_t> sample_interarrivals(const GGeoProcess& process, std::uint64_t seed,
                                                std::size_t count) {
  if (count == 0)
    throw DomainError("sample count must be >= 1");
  GGeoSampler sampler(process, seed);
  std::vector<std::uint64_t> gaps(count);
  for (auto& g : gaps)
    g = sampler.next_gap();
  return gaps;
}

GapMoments gap_moments(const std::vector<std::uint64_t>& gaps) {
  GapMoments out;
  out.count = gaps.size();
  if (gaps.empty())
    return out;
  long double sum = 0, sumsq = 0;
  for (auto g : gaps) {
    sum += g;
    sumsq += static_cast<long double>(g) * g;
  }
  const long double n = gaps.size();
  const long double mean = sum / n;
  out.mean = static_cast<double>(mean);
  if (mean > 0) {
    const long double var = sumsq / n - mean * mean;
    out.scv = static_cast<double>(var / (mean * mean));
  }
  return out;
}

} // namespace nocperf

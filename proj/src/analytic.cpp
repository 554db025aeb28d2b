#include "nocperf/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "nocperf/error.hpp"

namespace nocperf {

namespace {

constexpr double kPZeroFloor = 1e-9;
constexpr double kTolerance = 1e-6;
constexpr int kMaxIterations = 1000;

bool converged(double next, double prev) {
  return std::abs(next - prev) <= kTolerance * std::max(1.0, std::abs(next));
}

// Burst factor of a propagated stream, tolerating rounding just below the
// Bernoulli floor.
double safe_burst(const MomentPair& m, Diagnostics* diag) {
  if (m.is_null())
    return 0.0;
  const double b = burst_factor(m);
  if (b < 0.0) {
    if (diag && b < -1e-12)
      ++diag->moment_floors;
    return 0.0;
  }
  return b;
}

void check_class(const TrafficClassSpec& c) {
  if (c.arrival.rate < 0.0 || c.arrival.rate > 1.0)
    throw DomainError("class '" + c.class_id + "' rate must lie in [0, 1]");
  if (!c.arrival.is_null() && c.arrival.scv < 1.0 - c.arrival.rate - 1e-12)
    throw DomainError("class '" + c.class_id + "' arrival scv is below the GGeo floor 1 - rate");
  if (c.service_time < 1)
    throw DomainError("class '" + c.class_id + "' needs service_time >= 1");
  if (c.service_scv < 0.0)
    throw DomainError("class '" + c.class_id + "' has a negative service scv");
}

// Builds the FIFO streams of one queue from its classes. Classes sharing a
// stream id are rejoined into their parent stream.
struct StreamBuild {
  std::vector<QueueStream> streams;
  std::vector<std::pair<int, int>> slot;  // per class: (stream, class index)
};

StreamBuild group_streams(const std::vector<const TrafficClassSpec*>& classes) {
  StreamBuild out;
  out.slot.resize(classes.size());
  std::map<int, std::vector<int>> by_stream;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i]->stream >= 0) {
      by_stream[classes[i]->stream].push_back(static_cast<int>(i));
    } else {
      out.slot[i] = {static_cast<int>(out.streams.size()), 0};
      out.streams.push_back({classes[i]->arrival, 0, {{1.0, classes[i]->service_time, 0, 0}}});
    }
  }
  for (const auto& [id, members] : by_stream) {
    double rate = 0.0;
    for (int i : members)
      rate += classes[i]->arrival.rate;
    double parent_scv = 0.0;
    bool have = false;
    for (int i : members) {
      const auto& a = classes[i]->arrival;
      if (a.is_null())
        continue;
      const double f = a.rate / rate;
      const double scv = (a.scv - 1.0 + f) / f;
      if (have && std::abs(scv - parent_scv) > 1e-9 * std::max(1.0, parent_scv))
        throw ConfigError("classes of stream " + std::to_string(id) +
                          " are not rate splits of one stream");
      parent_scv = scv;
      have = true;
    }
    QueueStream s{{rate, parent_scv}, 0, {}};
    const int idx = static_cast<int>(out.streams.size());
    for (int i : members) {
      out.slot[i] = {idx, static_cast<int>(s.classes.size())};
      s.classes.push_back(
          {rate > 0 ? classes[i]->arrival.rate / rate : 0.0, classes[i]->service_time, 0, 0});
    }
    out.streams.push_back(std::move(s));
  }
  return out;
}

// Burst factor of a queue's whole input as one contender: batches of every
// stream plus same-slot coincidences of independent injectors.
double aggregate_burst(const std::vector<QueueStream>& streams, Diagnostics* diag) {
  double rate = 0.0, pairs = 0.0, batches = 0.0, inj_rate = 0.0;
  for (const auto& s : streams) {
    if (s.arrival.is_null())
      continue;
    rate += s.arrival.rate;
    batches += s.arrival.rate * safe_burst(s.arrival, diag);
    if (s.spacing == 0) {
      pairs += inj_rate * s.arrival.rate;
      inj_rate += s.arrival.rate;
    }
  }
  return rate > 0 ? (batches + pairs) / rate : 0.0;
}

} // namespace

void Diagnostics::merge(const Diagnostics& other) {
  scv_floors += other.scv_floors;
  p_zero_clamps += other.p_zero_clamps;
  wait_floors += other.wait_floors;
  moment_floors += other.moment_floors;
}

void PriorityGroup::validate() const {
  if (classes.empty())
    throw DomainError("a priority group needs at least one class");
  double util = 0.0;
  std::map<int, const TrafficClassSpec*> first_of_rank;
  for (const auto& c : classes) {
    check_class(c);
    util += c.arrival.rate * c.service_time;
    auto [it, fresh] = first_of_rank.emplace(c.priority_rank, &c);
    if (!fresh && (it->second->service_time != c.service_time ||
                   it->second->service_scv != c.service_scv))
      throw DomainError("same-rank classes share one queue and must have the same service");
  }
  if (util >= 1.0)
    throw InstabilityError("priority group utilization " + std::to_string(util) + " >= 1");
}

const ClassSolution& QueueSolution::at(const std::string& class_id) const {
  for (const auto& c : classes)
    if (c.class_id == class_id)
      return c;
  throw DomainError("no class '" + class_id + "' in solution");
}

double ggeo_g1_occupancy(double utilization, double arrival_scv, double service_scv) {
  if (utilization < 0.0)
    throw DomainError("utilization must be >= 0");
  if (utilization >= 1.0)
    throw InstabilityError("utilization " + std::to_string(utilization) + " >= 1");
  const double rho = utilization;
  return rho * (1.0 - rho + arrival_scv + rho * service_scv) / (2.0 * (1.0 - rho));
}

namespace {

double p_zero_raw(double own_util, const std::vector<CrossTerm>& others) {
  if (own_util < 0.0 || own_util >= 1.0)
    throw DomainError("own utilization must lie in [0, 1)");
  double p = 1.0 - own_util;
  for (const auto& o : others) {
    if (o.util < 0.0 || o.util >= 1.0 || o.cross_occupancy < 0.0)
      throw DomainError("cross terms need utilization in [0, 1) and occupancy >= 0");
    if (o.util > 0.0 && o.cross_occupancy > 0.0)
      p -= o.util * o.cross_occupancy / (o.util + o.cross_occupancy);
  }
  return p;
}

} // namespace

double p_zero(double own_util, const std::vector<CrossTerm>& others) {
  const double p = p_zero_raw(own_util, others);
  if (p <= 0.0)
    throw ModelBreakdownError("p(0) = " + std::to_string(p) + " <= 0");
  return p;
}

double p_zero(double own_util, const std::vector<CrossTerm>& others, Diagnostics& diag) {
  const double p = p_zero_raw(own_util, others);
  if (p <= 0.0) {
    ++diag.p_zero_clamps;
    return kPZeroFloor;
  }
  return p;
}

double modified_service_time(double rate, double p_zero) {
  if (!(rate > 0.0))
    throw DomainError("modified_service_time needs rate > 0");
  if (!(p_zero > 0.0 && p_zero <= 1.0))
    throw DomainError("p(0) must lie in (0, 1]");
  const double t = (1.0 - p_zero) / rate;
  if (t * rate >= 1.0)
    throw InstabilityError("modified utilization reaches 1");
  return t;
}

double modified_service_scv(double util_hat, double occupancy, double arrival_scv,
                            Diagnostics* diag) {
  if (!(util_hat > 0.0 && util_hat < 1.0))
    throw DomainError("modified utilization must lie in (0, 1)");
  const double r = util_hat;
  const double c = ((1.0 - r) * (2.0 * occupancy - r) - r * arrival_scv) / (r * r);
  if (c < 0.0) {
    if (diag)
      ++diag->scv_floors;
    return 0.0;
  }
  return c;
}

double cross_occupancy(double rate, double waiting, double other_util) {
  if (rate < 0.0 || waiting < 0.0 || other_util < 0.0)
    throw DomainError("cross_occupancy inputs must be nonnegative");
  if (other_util >= 1.0)
    throw DomainError("cross_occupancy needs other utilization < 1");
  return other_util * rate * waiting;
}

double blocking_occupancy(double weight, double other_util, double util_hat) {
  if (util_hat >= 1.0)
    throw InstabilityError("modified utilization reaches 1");
  return weight * other_util * util_hat / (1.0 - util_hat);
}

double residual_time(const std::vector<WaitingClass>& classes) {
  double r = 0.0;
  for (const auto& c : classes) {
    const double rho_hat = c.rate * c.t_hat;
    r += 0.5 * rho_hat * (c.t_hat - 1.0 + c.t_hat * c.scv_hat);
  }
  return r;
}

std::vector<double> waiting_time(const std::vector<WaitingClass>& classes, Diagnostics* diag) {
  double util = 0.0, batch = 0.0;
  std::vector<double> beta(classes.size(), 0.0);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& c = classes[i];
    beta[i] = c.rate > 0 ? burst_factor(c.rate, c.arrival_scv) : 0.0;
    const double rho_hat = c.rate * c.t_hat;
    util += rho_hat;
    batch += rho_hat * c.t_hat * beta[i];
  }
  if (util >= 1.0)
    throw InstabilityError("decomposed queue utilization " + std::to_string(util) + " >= 1");
  const double base = (residual_time(classes) + batch) / (1.0 - util);
  std::vector<double> w(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    w[i] = base + classes[i].t_hat * (beta[i] + 1.0) - classes[i].service_time;
    if (w[i] < 0.0) {
      if (diag && w[i] < -1e-12)
        ++diag->wait_floors;
      w[i] = 0.0;
    }
  }
  return w;
}

namespace {

double mean_t_hat(const QueueStream& s) {
  double t = 0.0;
  for (const auto& c : s.classes)
    t += c.fraction * c.t_hat;
  return t;
}

double self_burst(const QueueStream& s, double t_bar, Diagnostics* diag) {
  const double b = safe_burst(s.arrival, diag);
  if (s.spacing <= 0 || t_bar <= 0.0)
    return b;
  return b * std::max(0.0, 1.0 - s.spacing / t_bar);
}

} // namespace

double effective_burst(const QueueStream& stream) {
  return self_burst(stream, mean_t_hat(stream), nullptr);
}

QueueWaiting queue_waiting_time(const std::vector<QueueStream>& streams, Diagnostics* diag) {
  QueueWaiting out;
  const std::size_t n = streams.size();
  std::vector<double> t_bar(n), beta(n);
  double util = 0.0, residual = 0.0, batch = 0.0, rate = 0.0, m2 = 0.0;
  double inj_work = 0.0;  // sum lambda T_bar over injector streams
  for (std::size_t s = 0; s < n; ++s) {
    const auto& st = streams[s];
    t_bar[s] = mean_t_hat(st);
    beta[s] = self_burst(st, t_bar[s], diag);
    const double lam = st.arrival.is_null() ? 0.0 : st.arrival.rate;
    for (const auto& c : st.classes) {
      const double rho_hat = lam * c.fraction * c.t_hat;
      util += rho_hat;
      residual += 0.5 * rho_hat * (c.t_hat - 1.0 + c.t_hat * c.scv_hat);
      rate += lam * c.fraction;
      m2 += lam * c.fraction * c.t_hat * c.t_hat * (1.0 + c.scv_hat);
    }
    batch += lam * beta[s] * t_bar[s] * t_bar[s];
    if (st.spacing == 0) {
      batch += inj_work * lam * t_bar[s];
      inj_work += lam * t_bar[s];
    }
  }
  if (util >= 1.0)
    throw InstabilityError("decomposed queue utilization " + std::to_string(util) + " >= 1");
  out.residual = residual;
  out.util_hat = util;
  if (rate > 0.0) {
    out.mean_service = util / rate;
    out.service_scv = std::max(0.0, (m2 / rate) / (out.mean_service * out.mean_service) - 1.0);
  }
  const double base = (residual + batch) / (1.0 - util);
  out.waiting.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& st = streams[s];
    const double lam = st.arrival.is_null() ? 0.0 : st.arrival.rate;
    // Independent injectors landing in the same cycle go in random order.
    const double coincident = st.spacing == 0 ? 0.5 * (inj_work - lam * t_bar[s]) : 0.0;
    for (const auto& c : st.classes) {
      double w = base + beta[s] * t_bar[s] + coincident + c.t_hat - c.service_time;
      if (w < 0.0) {
        if (diag && w < -1e-12)
          ++diag->wait_floors;
        w = 0.0;
      }
      out.waiting[s].push_back(w);
    }
  }
  return out;
}

ServerDecomposition decompose_server(const std::vector<Contender>& inputs, Diagnostics& diag) {
  const std::size_t n = inputs.size();
  ServerDecomposition out;
  out.inputs.resize(n);
  std::vector<double> rho(n);
  double r0 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = inputs[k];
    if (c.rate < 0.0 || c.service_time < 1 || c.service_scv < 0.0)
      throw DomainError("contender needs rate >= 0 and service_time >= 1");
    rho[k] = c.rate * c.service_time;
    r0 += 0.5 * rho[k] * (c.service_time - 1.0 + c.service_time * c.service_scv);
  }
  // Work balance for a tagged arrival of input e: residual service, queued
  // and same-cycle work of inputs served first, own batch, and work of
  // higher ranks arriving while it waits.
  std::vector<double> denom(n);
  for (std::size_t e = 0; e < n; ++e) {
    double higher = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (inputs[k].rank < inputs[e].rank)
        higher += rho[k];
    denom[e] = 1.0 - rho[e] - higher;
    if (denom[e] <= 0.0)
      throw InstabilityError("server saturated by higher-priority load");
  }
  auto rhs = [&](std::size_t e, const std::vector<double>& w, double burst) {
    double v = r0 + burst * inputs[e].service_time;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == e)
        continue;
      if (inputs[k].rank < inputs[e].rank)
        v += rho[k] * (w[k] + 1.0);
      else if (inputs[k].rank == inputs[e].rank)
        v += rho[k] * (w[k] + 0.5);
    }
    return v;
  };

  // Waits of the streams as the other inputs see them. Damped Jacobi.
  std::vector<double> seen(n, 0.0), next(n);
  int it = 0;
  for (;; ++it) {
    if (it >= kMaxIterations)
      throw NonConvergenceError("server decomposition did not converge", it, 0.0);
    bool done = true;
    for (std::size_t e = 0; e < n; ++e) {
      const double target = rhs(e, seen, inputs[e].burst_seen) / denom[e];
      if (!converged(target, seen[e]))
        done = false;
      next[e] = 0.5 * seen[e] + 0.5 * target;
    }
    if (done)
      break;
    seen.swap(next);
  }
  out.iterations = it + 1;

  for (std::size_t e = 0; e < n; ++e) {
    const auto& c = inputs[e];
    auto& sol = out.inputs[e];
    sol.waiting = rhs(e, seen, c.burst_self) / denom[e];
    sol.cross_occupancy.assign(n, 0.0);
    std::vector<double> weight(n, 0.0);
    double weighted_util = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == e)
        continue;
      if (inputs[k].rank < c.rank)
        weight[k] = 1.0;
      else if (inputs[k].rank == c.rank)
        weight[k] = 0.5;
      else
        weight[k] = (inputs[k].service_time - 1.0) / (2.0 * inputs[k].service_time);
      weighted_util += weight[k] * rho[k];
    }
    auto& m = sol.modified;
    if (c.rate <= 0.0) {
      // Limit of the closure as the input's own rate vanishes.
      m.t_hat = c.service_time / std::max(1e-12, 1.0 - weighted_util);
      m.scv_hat = c.service_scv;
      m.util_hat = 0.0;
      m.p_zero = 1.0;
      m.occupancy = 0.0;
      continue;
    }
    double t_hat = c.service_time;
    std::vector<CrossTerm> terms(n);
    for (int j = 0;; ++j) {
      if (j >= kMaxIterations)
        throw NonConvergenceError("modified service time did not converge", j, 0.0);
      const double util_hat = std::min(c.rate * t_hat, 1.0 - 1e-12);
      for (std::size_t k = 0; k < n; ++k)
        terms[k] = {rho[k], k == e ? 0.0 : blocking_occupancy(weight[k], rho[k], util_hat)};
      const double p0 = p_zero(rho[e], terms, diag);
      m.p_zero = p0;
      const double t_next = (1.0 - p0) / c.rate;
      const bool done = std::abs(t_next - t_hat) <= 1e-12 * t_hat;
      t_hat = t_next;
      if (done || c.rate * t_hat >= 1.0)
        break;
    }
    for (std::size_t k = 0; k < n; ++k)
      sol.cross_occupancy[k] = terms[k].cross_occupancy;
    m.t_hat = t_hat;
    m.util_hat = c.rate * t_hat;
    if (m.util_hat >= 1.0)
      throw InstabilityError("decomposed utilization reaches 1");
    m.occupancy = c.rate * (sol.waiting + c.service_time);
    m.scv_hat = modified_service_scv(m.util_hat, m.occupancy, 2.0 * c.burst_self + 1.0 - c.rate,
                                     &diag);
  }
  return out;
}

namespace {

ModifiedService unmodified(const TrafficClassSpec& c, double waiting) {
  ModifiedService m;
  m.t_hat = c.service_time;
  m.scv_hat = c.service_scv;
  m.util_hat = c.arrival.rate * c.service_time;
  m.p_zero = 1.0 - m.util_hat;
  m.occupancy = c.arrival.rate * (waiting + c.service_time);
  return m;
}

Contender contender_of(const std::vector<QueueStream>& streams, int service_time,
                       double service_scv, int rank, Diagnostics& diag) {
  Contender c;
  for (const auto& s : streams)
    if (!s.arrival.is_null())
      for (const auto& k : s.classes)
        c.rate += s.arrival.rate * k.fraction;
  c.service_time = service_time;
  c.service_scv = service_scv;
  c.rank = rank;
  c.burst_self = c.burst_seen = aggregate_burst(streams, &diag);
  return c;
}

void fill_modified(std::vector<QueueStream>& streams, const ModifiedService& m) {
  for (auto& s : streams)
    for (auto& k : s.classes) {
      k.t_hat = m.t_hat;
      k.scv_hat = m.scv_hat;
    }
}

ClassSolution class_solution(const TrafficClassSpec& spec, double waiting,
                             const ModifiedService& queue_level) {
  ClassSolution c;
  c.class_id = spec.class_id;
  c.waiting = waiting;
  c.occupancy = spec.arrival.rate * (waiting + spec.service_time);
  c.modified = queue_level;
  c.modified.util_hat = spec.arrival.rate * queue_level.t_hat;
  c.modified.occupancy = c.occupancy;
  return c;
}

} // namespace

QueueSolution decompose_basic_priority(const PriorityGroup& group) {
  group.validate();
  QueueSolution sol;
  std::map<int, std::vector<int>> by_rank;
  for (std::size_t i = 0; i < group.classes.size(); ++i)
    by_rank[group.classes[i].priority_rank].push_back(static_cast<int>(i));

  std::vector<StreamBuild> queues;
  std::vector<Contender> contenders;
  for (const auto& [rank, members] : by_rank) {
    std::vector<const TrafficClassSpec*> specs;
    for (int i : members)
      specs.push_back(&group.classes[i]);
    queues.push_back(group_streams(specs));
    const auto& first = *specs.front();
    contenders.push_back(
        contender_of(queues.back().streams, first.service_time, first.service_scv, rank,
                     sol.diagnostics));
  }
  const auto dec = decompose_server(contenders, sol.diagnostics);
  sol.iterations = dec.iterations;

  sol.classes.resize(group.classes.size());
  sol.cross_occupancy.assign(group.classes.size(),
                             std::vector<double>(group.classes.size(), 0.0));
  std::vector<int> queue_of(group.classes.size());
  std::size_t q = 0;
  for (const auto& [rank, members] : by_rank) {
    auto& build = queues[q];
    fill_modified(build.streams, dec.inputs[q].modified);
    const auto w = queue_waiting_time(build.streams, &sol.diagnostics);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto [s, k] = build.slot[j];
      const int i = members[j];
      sol.classes[i] =
          class_solution(group.classes[i], w.waiting[s][k], dec.inputs[q].modified);
      queue_of[i] = static_cast<int>(q);
    }
    ++q;
  }
  // Class-level cross occupancy: the queue's blocked population, split by
  // rate share on both sides.
  for (std::size_t m = 0; m < group.classes.size(); ++m)
    for (std::size_t k = 0; k < group.classes.size(); ++k) {
      const int qm = queue_of[m], qk = queue_of[k];
      if (qm == qk || contenders[qm].rate <= 0 || contenders[qk].rate <= 0)
        continue;
      sol.cross_occupancy[m][k] = dec.inputs[qm].cross_occupancy[qk] *
                                  group.classes[m].arrival.rate / contenders[qm].rate *
                                  group.classes[k].arrival.rate / contenders[qk].rate;
    }
  std::vector<WaitingClass> all;
  for (const auto& c : sol.classes)
    all.push_back({group.classes[&c - sol.classes.data()].arrival.rate, 0.0, 1, c.modified.t_hat,
                   c.modified.scv_hat});
  sol.residual = residual_time(all);
  return sol;
}

QueueSolution decompose_contention_low(const TrafficClassSpec& high, const TrafficClassSpec& c2,
                                       const TrafficClassSpec& c3) {
  for (const auto* c : {&high, &c2, &c3})
    check_class(*c);
  if (high.priority_rank >= c2.priority_rank)
    throw DomainError("contention at low priority needs class 1 to outrank class 2");
  QueueSolution sol;
  // Server A as a basic pair, class 2 seen through its own arrivals.
  PriorityGroup pair{{high, c2}};
  pair.classes[1].stream = -1;
  pair.validate();
  const auto basic = decompose_basic_priority(pair);
  sol.diagnostics.merge(basic.diagnostics);
  sol.iterations = basic.iterations;

  auto build = group_streams({&c2, &c3});
  const auto& m2 = basic.classes[1].modified;
  const auto [s2, k2] = build.slot[0];
  const auto [s3, k3] = build.slot[1];
  build.streams[s2].classes[k2].t_hat = m2.t_hat;
  build.streams[s2].classes[k2].scv_hat = m2.scv_hat;
  build.streams[s3].classes[k3].t_hat = c3.service_time;
  build.streams[s3].classes[k3].scv_hat = c3.service_scv;
  const auto w = queue_waiting_time(build.streams, &sol.diagnostics);

  sol.classes.push_back(basic.classes[0]);
  sol.classes.push_back(class_solution(c2, w.waiting[s2][k2], m2));
  const double w3 = w.waiting[s3][k3];
  sol.classes.push_back(class_solution(c3, w3, unmodified(c3, w3)));
  sol.cross_occupancy = {{0, basic.cross_occupancy[0][1], 0},
                         {basic.cross_occupancy[1][0], 0, 0},
                         {0, 0, 0}};
  sol.residual = basic.residual + w.residual;
  return sol;
}

QueueSolution decompose_contention_high(const TrafficClassSpec& c1, const TrafficClassSpec& c2,
                                        const TrafficClassSpec& low) {
  for (const auto* c : {&c1, &c2, &low})
    check_class(*c);
  if (c1.priority_rank != c2.priority_rank)
    throw DomainError("contention at high priority needs classes 1 and 2 in one queue");
  if (c2.priority_rank >= low.priority_rank)
    throw DomainError("contention at high priority needs class 2 to outrank class 3");
  QueueSolution sol;
  auto diag = &sol.diagnostics;

  auto q1 = group_streams({&c1, &c2});
  const auto [s1, k1] = q1.slot[0];
  const auto [s2, k2] = q1.slot[1];
  std::vector<QueueStream> q3{{low.arrival, 0, {{1.0, low.service_time, 0, 0}}}};

  // Server A serves class 1 alone.
  const auto a = decompose_server({contender_of({q1.streams[s1]}, c1.service_time, c1.service_scv,
                                                c1.priority_rank, sol.diagnostics)},
                                  sol.diagnostics);
  ModifiedService m1 = a.inputs[0].modified;
  if (c1.arrival.is_null())
    m1 = unmodified(c1, 0.0);
  q1.streams[s1].classes[k1].t_hat = m1.t_hat;
  q1.streams[s1].classes[k1].scv_hat = m1.scv_hat;

  ModifiedService m2 = unmodified(c2, 0.0), m3 = unmodified(low, 0.0);
  double prev[3] = {-1, -1, -1};
  QueueWaiting w1, w3;
  for (int it = 0;; ++it) {
    if (it >= kMaxIterations)
      throw NonConvergenceError("contention-high decomposition did not converge", it, 0.0);
    q1.streams[s2].classes[k2].t_hat = m2.t_hat;
    q1.streams[s2].classes[k2].scv_hat = m2.scv_hat;
    w1 = queue_waiting_time(q1.streams, diag);

    // Virtual queue: class 2 as it leaves q1, i.e. the departure stream of
    // q1 split down to class 2.
    double seen = 0.0;
    for (const auto& st : q1.streams) {
      if (st.arrival.is_null())
        continue;
      const double share = st.arrival.rate / (c1.arrival.rate + c2.arrival.rate);
      const double cs = share * w1.service_scv + 1.0 - share;
      const MomentPair dep{st.arrival.rate, departure_scv(w1.util_hat, st.arrival.scv, cs)};
      for (std::size_t k = 0; k < st.classes.size(); ++k) {
        if (&st != &q1.streams[s2] || static_cast<int>(k) != k2)
          continue;
        const MomentPair v = split_stream(dep, st.classes[k].fraction);
        seen += v.rate * safe_burst(v, diag);
      }
    }
    Contender hi{c2.arrival.rate, c2.service_time, c2.service_scv, c2.priority_rank, 0, 0};
    hi.burst_self = safe_burst(c2.arrival, diag);
    hi.burst_seen = c2.arrival.rate > 0 ? seen / c2.arrival.rate : 0.0;
    Contender lo = contender_of(q3, low.service_time, low.service_scv, low.priority_rank,
                                sol.diagnostics);
    const auto b = decompose_server({hi, lo}, sol.diagnostics);
    m2 = c2.arrival.is_null() ? unmodified(c2, 0.0) : b.inputs[0].modified;
    m3 = low.arrival.is_null() ? unmodified(low, 0.0) : b.inputs[1].modified;
    q3[0].classes[0].t_hat = m3.t_hat;
    q3[0].classes[0].scv_hat = m3.scv_hat;
    w3 = queue_waiting_time(q3, diag);
    sol.cross_occupancy = {{0, 0, 0},
                           {0, 0, b.inputs[0].cross_occupancy[1]},
                           {0, b.inputs[1].cross_occupancy[0], 0}};

    const double cur[3] = {w1.waiting[s1][k1], w1.waiting[s2][k2], w3.waiting[0][0]};
    bool done = true;
    for (int i = 0; i < 3; ++i)
      done = done && converged(cur[i], prev[i]);
    std::copy(cur, cur + 3, prev);
    sol.iterations = it + 1;
    if (done)
      break;
  }
  // Final pass so q1 reflects the last class-2 service.
  q1.streams[s2].classes[k2].t_hat = m2.t_hat;
  q1.streams[s2].classes[k2].scv_hat = m2.scv_hat;
  w1 = queue_waiting_time(q1.streams, diag);

  sol.classes.push_back(class_solution(c1, w1.waiting[s1][k1], m1));
  sol.classes.push_back(class_solution(c2, w1.waiting[s2][k2], m2));
  sol.classes.push_back(class_solution(low, w3.waiting[0][0], m3));
  sol.residual = w1.residual + w3.residual;
  return sol;
}

} // namespace nocperf

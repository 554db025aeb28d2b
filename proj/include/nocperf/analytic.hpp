#pragma once

#include <string>
#include <vector>

#include "nocperf/traffic.hpp"

namespace nocperf {

/// Counts of clamps and floors applied while solving. A nonzero count means
/// the model was pushed outside the region where its closed forms are
/// physical; results are still returned.
struct Diagnostics {
  int scv_floors = 0;     // negative modified service scv floored at 0
  int p_zero_clamps = 0;  // p(0) <= 0 clamped to a tiny positive value
  int wait_floors = 0;    // negative waiting time floored at 0
  int moment_floors = 0;  // propagated stream scv raised to 1 - rate

  void merge(const Diagnostics& other);
  int total() const { return scv_floors + p_zero_clamps + wait_floors + moment_floors; }
};

struct TrafficClassSpec {
  std::string class_id;
  MomentPair arrival;
  int service_time = 1;
  double service_scv = 0.0;
  int priority_rank = 0;  // lower is served first
  // Classes with the same nonnegative stream id are rate splits of one
  // injector (they share its same-slot batches). -1: an independent stream.
  int stream = -1;
};

/// Classes sharing one non-preemptive priority server. Same-rank classes
/// share one FIFO queue.
struct PriorityGroup {
  std::vector<TrafficClassSpec> classes;

  void validate() const;
};

struct ModifiedService {
  double t_hat = 0.0;
  double scv_hat = 0.0;
  double util_hat = 0.0;
  double p_zero = 1.0;
  double occupancy = 0.0;
};

struct ClassSolution {
  std::string class_id;
  double waiting = 0.0;
  double occupancy = 0.0;  // lambda (W + T)
  ModifiedService modified;
};

struct QueueSolution {
  std::vector<ClassSolution> classes;  // input order
  double residual = 0.0;
  // cross_occupancy[m][k]: class-m population while class k holds the server.
  std::vector<std::vector<double>> cross_occupancy;
  int iterations = 0;
  Diagnostics diagnostics;

  const ClassSolution& at(const std::string& class_id) const;
};

// ---- building blocks -------------------------------------------------------

/// Mean number in a GGeo/G/1 queue (waiting plus in service).
/// n = rho (1 - rho + Ca^2 + rho Cs^2) / (2 (1 - rho)).
double ggeo_g1_occupancy(double utilization, double arrival_scv, double service_scv);

struct CrossTerm {
  double util = 0.0;            // rho_k
  double cross_occupancy = 0.0; // n_mk
};

/// p_m(0) = 1 - rho_m - sum rho_k n_mk / (rho_k + n_mk).
/// Throws ModelBreakdownError when the result is <= 0.
double p_zero(double own_util, const std::vector<CrossTerm>& others);
/// Same, but clamps a nonpositive result and counts it.
double p_zero(double own_util, const std::vector<CrossTerm>& others, Diagnostics& diag);

/// T_hat = (1 - p(0)) / lambda.
double modified_service_time(double rate, double p_zero);

/// C_hat^2 = ((1 - rho)(2 n - rho) - rho Ca^2) / rho^2, floored at 0.
double modified_service_scv(double util_hat, double occupancy, double arrival_scv,
                            Diagnostics* diag = nullptr);

/// rho_k lambda_m W_m: class-m waiting population thinned by the chance the
/// server holds class k.
double cross_occupancy(double rate, double waiting, double other_util);

/// Population of the input being decomposed that piles up while a
/// contender holds the server: weight * rho_k * rho_hat / (1 - rho_hat). The
/// weight is 1 for a higher-rank contender, 1/2 for an equal-rank one
/// (round-robin), and (T_k - 1)/(2 T_k) for a lower-rank one, which can only
/// block by still being in service.
double blocking_occupancy(double weight, double other_util, double util_hat);

struct WaitingClass {
  double rate = 0.0;
  double arrival_scv = 0.0;
  int service_time = 1;
  double t_hat = 1.0;
  double scv_hat = 0.0;
};

/// R = sum 1/2 rho_hat (T_hat - 1 + T_hat C_hat^2).
double residual_time(const std::vector<WaitingClass>& classes);

/// Mean queueing time of each class of one decomposed FIFO queue:
/// W_m = (R + sum rho_hat_k T_hat_k beta_k)/(1 - sum rho_hat_k)
///       + T_hat_m (beta_m + 1) - T_m
/// Every class is its own arrival stream. Negative values are floored.
std::vector<double> waiting_time(const std::vector<WaitingClass>& classes,
                                 Diagnostics* diag = nullptr);

/// A FIFO queue fed by several arrival streams, each split over the
/// queue's outputs. Classes of one stream share its same-slot batches.
struct StreamClass {
  double fraction = 1.0;  // share of the stream's flits in this class
  int service_time = 1;
  double t_hat = 1.0;
  double scv_hat = 0.0;
};

struct QueueStream {
  MomentPair arrival;
  // Minimum arrival spacing in cycles. 0 for an injector, which may deliver
  // a whole batch in one cycle; a link-fed stream arrives at most one flit
  // per upstream service time, so its bursts are spread out.
  int spacing = 0;
  std::vector<StreamClass> classes;
};

struct QueueWaiting {
  std::vector<std::vector<double>> waiting;  // [stream][class]
  double residual = 0.0;
  double util_hat = 0.0;
  double mean_service = 0.0;  // rate-weighted T_hat
  double service_scv = 0.0;   // scv of the T_hat mixture
};

/// Stream-aware form of waiting_time. A single stream with one class and
/// spacing 0 gives exactly waiting_time's result. Independent injectors
/// (spacing 0) sharing the queue add their same-slot coincidences.
QueueWaiting queue_waiting_time(const std::vector<QueueStream>& streams,
                                Diagnostics* diag = nullptr);

/// Effective burst factor of a stream as seen by its own queue.
double effective_burst(const QueueStream& stream);

// ---- server decomposition --------------------------------------------------

/// One input queue's traffic towards a shared server.
struct Contender {
  double rate = 0.0;
  int service_time = 1;
  double service_scv = 0.0;
  int rank = 0;
  double burst_self = 0.0;  // burst factor of its own arrivals
  double burst_seen = 0.0;  // burst factor of the stream other inputs see
};

struct ContenderSolution {
  double waiting = 0.0;  // queueing time in the isolated priority structure
  ModifiedService modified;
  std::vector<double> cross_occupancy;  // vs every contender (0 on itself)
};

struct ServerDecomposition {
  std::vector<ContenderSolution> inputs;
  int iterations = 0;
};

/// Decomposes one server shared by several input queues under
/// non-preemptive priority with round-robin among equal ranks. Waits come
/// from a work balance in the original structure; T_hat from p(0) with
/// blocking_occupancy; C_hat from inverting the occupancy at T_hat.
ServerDecomposition decompose_server(const std::vector<Contender>& inputs, Diagnostics& diag);

// ---- canonical structures --------------------------------------------------

QueueSolution decompose_basic_priority(const PriorityGroup& group);

/// Class 1 alone in q1 (high) at server A; classes 2 and 3 share q2 (low),
/// class 2 going to server A and class 3 to server B.
QueueSolution decompose_contention_low(const TrafficClassSpec& high, const TrafficClassSpec& c2,
                                       const TrafficClassSpec& c3);

/// Classes 1 and 2 share q1 (high), class 1 going to server A and class 2 to
/// server B, where it outranks class 3 in q3.
QueueSolution decompose_contention_high(const TrafficClassSpec& c1, const TrafficClassSpec& c2,
                                        const TrafficClassSpec& low);

} // namespace nocperf

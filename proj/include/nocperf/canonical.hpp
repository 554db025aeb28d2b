#pragma once

#include <string_view>
#include <vector>

#include "nocperf/simulator.hpp"
#include "nocperf/traffic.hpp"

namespace nocperf {

/// The three isolated priority structures the decomposition is built from.
///
///   basic            every class has its own queue (classes of equal rank
///                    share one) in front of a single server.
///   contention_low   class 1 in q1 (high) and classes 2, 3 sharing q2 (low);
///                    class 1 and 2 go to server A, class 3 to server B.
///   contention_high  classes 1, 2 share q1 (high), class 3 in q3 (low);
///                    class 1 goes to server A, classes 2 and 3 to server B.
enum class CanonicalStructure { basic, contention_low, contention_high };

CanonicalStructure parse_structure(std::string_view name);
std::string_view structure_name(CanonicalStructure s);

struct CanonicalClass {
  double rate = 0.0;  // 0 = class absent
  double burst_prob = 0.0;
  int rank = 0;  // basic only; fixed by the layout otherwise
};

struct CanonicalParams {
  std::vector<CanonicalClass> classes;
  int service_time = 1;
};

/// Flow i of the model is class i. Zero-rate classes are allowed and
/// simply never inject. Classes sharing a queue are drawn from a single
/// injector split by rate, so they must agree on burst_prob.
SimModel build_canonical(CanonicalStructure structure, const CanonicalParams& params);

SimReport run_canonical(CanonicalStructure structure, const CanonicalParams& params,
                        const SimOptions& options);

} // namespace nocperf

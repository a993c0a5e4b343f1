#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "enr/tensor.hpp"

namespace enr {

/// Result of a low-rank solve. Trace entry 0 is the initial point; entry t
/// is the state after iteration t.
struct SolveReport {
  DenseTensor recovered;
  FactorSet factors;
  std::size_t final_rank = 0;
  std::vector<double> objective_trace;
  std::vector<std::size_t> rank_trace;
  std::vector<double> time_trace;
  int iterations = 0;
  double wall_time = 0.0;
  bool converged = false;
};

/// CSV with header `iter,objective,rank,seconds`, one row per trace entry.
void write_trace_csv(std::ostream& out, const SolveReport& report);

}  // namespace enr

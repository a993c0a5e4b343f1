#include "enr/solve_report.hpp"

#include <ostream>

namespace enr {

void write_trace_csv(std::ostream& out, const SolveReport& report) {
  const auto old_precision = out.precision(17);
  out << "iter,objective,rank,seconds\n";
  for (std::size_t t = 0; t < report.objective_trace.size(); ++t) {
    out << t << ',' << report.objective_trace[t] << ','
        << (t < report.rank_trace.size() ? report.rank_trace[t] : report.final_rank) << ','
        << (t < report.time_trace.size() ? report.time_trace[t] : 0.0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace enr

#pragma once

// Low-rank tensor completion with Euclidean-norm regularization:
//
//     min_f  1/2 || M * (D - CP(f)) ||_F^2 + lambda * R(f)
//
// solved either by block coordinate descent with extrapolation (one
// proximal-gradient step per mode, Gauss-Seidel order) or by a limited-memory
// quasi-Newton method over all factor entries at once.

#include <cstddef>
#include <cstdint>

#include "enr/regularizers.hpp"
#include "enr/solve_report.hpp"
#include "enr/tensor.hpp"

namespace enr {

enum class LrtcSolver { Bcde, QuasiNewton };

struct LrtcConfig {
  std::size_t k_init = 10;
  double lambda = 0.0;
  RegularizerSpec spec = RegularizerSpec::symmetric(3, 1.0 / 3.0);
  int t_max = 500;
  double rho = 1.0;     // Lipschitz estimate scale, 0.5, 1 or 2 in practice
  double delta = 0.95;  // extrapolation strength, 0 disables it
  double prune_tol = 1e-5;
  double conv_tol = 1e-8;
  std::uint64_t seed = 0;
  LrtcSolver solver = LrtcSolver::Bcde;
  int qn_memory = 10;
  IrlsOptions irls{};

  void validate() const;
};

/// Objective pieces over a fixed data tensor and mask.
class LrtcProblem {
 public:
  LrtcProblem(const DenseTensor& data, const ObservationMask& mask, double lambda, RegularizerSpec spec);

  const Shape& shape() const { return entries_.shape(); }
  std::size_t observed() const { return entries_.count(); }
  double lambda() const { return lambda_; }
  const RegularizerSpec& spec() const { return spec_; }

  /// 1/2 sum over observed entries of (D - CP(f))^2.
  double loss(const FactorSet& f) const;
  double penalty(const FactorSet& f) const;
  double objective(const FactorSet& f) const { return loss(f) + penalty(f); }

  /// Gradient of the smooth loss with respect to factor `mode`.
  Matrix smooth_grad(const FactorSet& f, std::size_t mode) const;

 private:
  ObservedEntries entries_;
  double lambda_;
  RegularizerSpec spec_;
};

/// Standard normal columns rescaled to unit Euclidean norm.
FactorSet init_factors(const Shape& shape, std::size_t k, std::uint64_t seed);

double objective(const DenseTensor& d, const ObservationMask& m, const FactorSet& f, double lambda,
                 const RegularizerSpec& spec);

/// -(M_(j) * (D_(j) - X^(j) KR^T)) KR, KR the Khatri-Rao product of the other factors.
Matrix smooth_grad(const DenseTensor& d, const ObservationMask& m, const FactorSet& f, std::size_t mode);

/// rho * sqrt(|Omega| / prod n) * ||khatri_rao(f, mode)||_2^2, floored at 1e-12.
double estimate_lipschitz(const FactorSet& f, std::size_t mode, std::size_t observed, double rho);

/// 0 for iteration t <= 2, otherwise delta * sqrt(L_prev / L_curr).
double extrapolation_weight(double l_prev, double l_curr, int t, double delta);

SolveReport bcde_solve(const DenseTensor& d, const ObservationMask& m, const LrtcConfig& cfg);
SolveReport quasi_newton_solve(const DenseTensor& d, const ObservationMask& m, const LrtcConfig& cfg);

/// Dispatches on cfg.solver.
SolveReport lrtc_solve(const DenseTensor& d, const ObservationMask& m, const LrtcConfig& cfg);

}  // namespace enr

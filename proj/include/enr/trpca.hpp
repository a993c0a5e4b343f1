#pragma once

// Tensor robust PCA with Euclidean-norm regularization:
//
//     min_{f, E}  1/2 ||D - CP(f) - E||_F^2 + lambda_x * R(f) + lambda_e * ||E||_1
//
// Three solvers, picked by the effective exponent of R:
//   - pd = 1: ADMM with a group-sparse split Y = X in every mode;
//   - pd = 2: alternating ridge least squares;
//   - otherwise: ADMM with an IRLS split on mode 0 only, ridge on the other modes,
//     for R = sum_i (1/q)||x_i^(0)||^q + 1/2 sum_{j>=1} ||x_i^(j)||^2.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "enr/regularizers.hpp"
#include "enr/solve_report.hpp"
#include "enr/tensor.hpp"

namespace enr {

struct TrpcaConfig {
  std::size_t k_init = 10;
  double lambda_x = 0.0;
  double lambda_e = 1.0;  // +inf forces E = 0
  double mu = 10.0;
  double q = 0.5;  // mode-0 exponent of the asymmetric solver when spec does not fix it
  RegularizerSpec spec = RegularizerSpec::symmetric(3, 1.0 / 3.0);
  int t_max = 500;
  double conv_tol = 1e-8;
  std::uint64_t seed = 0;
  IrlsOptions irls{};

  void validate() const;
};

struct TrpcaResult {
  SolveReport report;
  DenseTensor sparse;
};

enum class TrpcaMethod { Admm, Asymmetric, Als };

/// Minimizer over X^(mode) of the ADMM augmented objective
///   1/2 ||(D - E)_(j) - X KR^T||^2 + <Y - X, Z> + mu/2 ||Y - X||^2,
/// i.e. ((D - E)_(j) KR + mu Y + Z) (KR^T KR + mu I)^{-1}.
Matrix trpca_x_update(const DenseTensor& d, const DenseTensor& e, const FactorSet& f, const Matrix& y,
                      const Matrix& z, std::size_t mode, double mu);

/// (target)_(j) KR (KR^T KR + ridge I)^{-1}: the minimizer of
/// 1/2 ||target_(j) - X KR^T||^2 + ridge/2 ||X||^2.
Matrix ridge_factor_update(const DenseTensor& target, const FactorSet& f, std::size_t mode, double ridge);

/// Entrywise soft threshold of D - CP(f) at lambda_e.
DenseTensor sparse_update(const DenseTensor& d, const FactorSet& f, double lambda_e);

/// Full objective of `method` at (f, e).
double trpca_objective(const DenseTensor& d, const FactorSet& f, const DenseTensor& e, const TrpcaConfig& cfg,
                       TrpcaMethod method, double q);

/// Mode-0 exponent the asymmetric solver uses for cfg: the spec's q for
/// asymmetric_b specs, the q matching the spec's p when that lies in (0, 1),
/// else cfg.q.
double trpca_asym_exponent(const TrpcaConfig& cfg);

/// Solver state advanced one outer iteration at a time.
class TrpcaIterator {
 public:
  TrpcaIterator(const DenseTensor& data, const TrpcaConfig& cfg, TrpcaMethod method);

  void step();

  int iteration() const { return iteration_; }
  const FactorSet& x() const { return x_; }
  /// Split variables: one per mode for Admm, mode 0 only for Asymmetric, none for Als.
  const std::vector<Matrix>& y() const { return y_; }
  const std::vector<Matrix>& z() const { return z_; }
  const DenseTensor& sparse() const { return e_; }
  double q() const { return q_; }
  double objective() const;
  /// Max over modes of relative factor change and relative E change in the last step;
  /// +inf after a step that pruned components.
  double last_change() const { return change_; }

 private:
  const DenseTensor& d_;
  TrpcaConfig cfg_;
  TrpcaMethod method_;
  double q_ = 0.0;
  FactorSet x_;
  std::vector<Matrix> y_;
  std::vector<Matrix> z_;
  DenseTensor e_;
  int iteration_ = 0;
  double change_ = 0.0;
};

TrpcaResult trpca_admm_solve(const DenseTensor& d, const TrpcaConfig& cfg);
TrpcaResult trpca_asym_solve(const DenseTensor& d, const TrpcaConfig& cfg);
TrpcaResult trpca_als_solve(const DenseTensor& d, const TrpcaConfig& cfg);

/// pd = 1 -> ADMM, pd = 2 -> ALS, anything else -> asymmetric ADMM.
TrpcaMethod trpca_method_for(const RegularizerSpec& spec);
TrpcaResult trpca_solve(const DenseTensor& d, const TrpcaConfig& cfg);

struct SparsitySummary {
  std::size_t nnz = 0;
  double fraction = 0.0;
};

/// Entries with |e| > tol.
SparsitySummary sparsity_summary(const DenseTensor& e, double tol = 0.0);

}  // namespace enr

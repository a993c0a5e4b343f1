#pragma once

// Euclidean-norm regularizers on CP factors and the proximal operators the
// solvers use to minimize them.
//
// Every regularizer here has the form
//
//     R(f) = sum_j c_j * sum_i ||x_i^(j)||^{e_j}
//
// with a per-mode coefficient c_j and exponent e_j. Its infimum over all CP
// decompositions of a tensor equals the Schatten-p quasi-norm raised to p,
// with p = 1 / sum_j (1 / e_j), and the infimum is attained when every mode
// satisfies c_j e_j ||x_i^(j)||^{e_j} = const (see balance_factors).

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "enr/tensor.hpp"

namespace enr {

enum class RegKind { SymmetricPd, AsymmetricA, AsymmetricB, Table2Fixed };

/// Third-order asymmetric rows: S_{1/2}, S_{2/5}, S_{3/7}.
enum class Table2Row { S12, S25, S37 };

struct ModeTerm {
  double coefficient = 0.0;
  double exponent = 1.0;
};

class RegularizerSpec {
 public:
  /// (1/d) sum_i sum_j ||x_i^(j)||^{p d}, 0 < p <= 1.
  static RegularizerSpec symmetric(std::size_t order, double p);
  /// p1 sum_i ((1/q)||x_i^(1)||^q + sum_{j>=2} ||x_i^(j)||), p1 = q / (1 + q d - q).
  static RegularizerSpec asymmetric_a(std::size_t order, double q);
  /// p2 sum_i ((1/q)||x_i^(1)||^q + 1/2 sum_{j>=2} ||x_i^(j)||^2), p2 = 2q / (2 + q d - q).
  static RegularizerSpec asymmetric_b(std::size_t order, double q);
  static RegularizerSpec table2(Table2Row row);

  /// Parses "sym:p=0.3333", "sym:p=1/3", "asym_a:q=0.5", "asym_b:q=1/2",
  /// "table2:s12" (also s25, s37). Decimal p within 1e-3 of m/d snaps to m/d.
  static RegularizerSpec parse(std::string_view text, std::size_t order);

  RegKind kind() const { return kind_; }
  std::size_t order() const { return order_; }
  /// Effective Schatten exponent p.
  double p() const { return p_; }
  /// Exponent q of the first mode (asymmetric kinds), else p d.
  double q() const { return q_; }
  /// Leading constant of the variational form.
  double coefficient() const { return coefficient_; }
  Table2Row row() const { return row_; }

  ModeTerm mode_term(std::size_t mode) const { return terms_.at(mode); }
  const std::vector<ModeTerm>& terms() const { return terms_; }

  std::string to_string() const;

 private:
  RegularizerSpec() = default;
  void finalize();

  RegKind kind_ = RegKind::SymmetricPd;
  std::size_t order_ = 0;
  double p_ = 0.0;
  double q_ = 0.0;
  double coefficient_ = 0.0;
  Table2Row row_ = Table2Row::S12;
  std::vector<ModeTerm> terms_;
};

/// ||x||^e summed over columns, with 0^e taken as 0.
double column_power_sum(const Matrix& x, double exponent);

double reg_value(const FactorSet& f, const RegularizerSpec& spec);

/// Subgradient of coefficient * sum_i ||x_i||^e with respect to x;
/// zero columns get the zero subgradient.
Matrix reg_mode_gradient(const Matrix& x, ModeTerm term);

/// Rescale every component so all modes share the geometric-mean column
/// norm. Components with any zero column become all-zero.
FactorSet balance_factors(const FactorSet& f);

/// Rescale every component to the equality point of `spec`'s variational
/// form: c_j e_j ||x_i^(j)||^{e_j} equal across modes, product of norms
/// unchanged. Reconstruction is unchanged.
FactorSet balance_factors(const FactorSet& f, const RegularizerSpec& spec);

/// argmin_G 1/2 ||Y - G||_F^2 + threshold * sum_i ||g_i||.
Matrix prox_group_soft(const Matrix& y, double threshold);

/// argmin_G L/2 ||Y - G||_F^2 + lambda ||G||_F^2  ==  L / (L + 2 lambda) * Y.
Matrix prox_ridge_scale(const Matrix& y, double lipschitz, double lambda);

struct IrlsOptions {
  int inner_iters = 10;
  double epsilon = 1e-6;
};

/// Approximate argmin_Y 1/2 ||Y - G||_F^2 + lambda * sum_i ||y_i||^q, 0 < q < 1,
/// by iteratively reweighted ridge steps started at Y = G:
///     y_i <- g_i / (1 + q * lambda * (||y_i|| + eps)^{q-2}).
/// Each step minimizes a quadratic majorizer of the eps-smoothed penalty, so
/// the smoothed objective never increases. A final per-column comparison
/// against the zero column keeps whichever has the lower exact objective.
/// When `surrogate_trace` is non-null it receives the smoothed objective
/// before the first and after every reweighting step.
Matrix prox_irls(const Matrix& g, double q, double lambda, const IrlsOptions& opts = {},
                 std::vector<double>* surrogate_trace = nullptr);

/// The eps-smoothed penalty majorized by prox_irls; tends to s^q as eps -> 0.
double irls_smoothed_penalty(double s, double q, double eps);

double soft_threshold(double v, double threshold);
DenseTensor soft_threshold_elem(const DenseTensor& t, double threshold);

}  // namespace enr

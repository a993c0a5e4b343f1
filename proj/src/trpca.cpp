#include "enr/trpca.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "enr/lrtc.hpp"
#include "enr/simd/kernels.hpp"

namespace enr {

void TrpcaConfig::validate() const {
  if (k_init < 1) throw std::invalid_argument("TrpcaConfig: k_init must be at least 1");
  if (t_max < 1) throw std::invalid_argument("TrpcaConfig: t_max must be at least 1");
  if (!(lambda_x >= 0.0) || std::isinf(lambda_x)) throw std::invalid_argument("TrpcaConfig: lambda_x must be finite and nonnegative");
  if (!(lambda_e >= 0.0)) throw std::invalid_argument("TrpcaConfig: lambda_e must be nonnegative");
  if (!(mu > 0.0) || std::isinf(mu)) throw std::invalid_argument("TrpcaConfig: mu must be positive");
  if (!(conv_tol >= 0.0)) throw std::invalid_argument("TrpcaConfig: conv_tol must be nonnegative");
}

namespace {

// rhs * B^{-1} for symmetric B. Positive definite in every ADMM call; the
// ridge calls with zero ridge can be singular, where the minimum-norm
// least-squares solution is used instead.
Matrix solve_right_sym(const Matrix& rhs, const Matrix& b) {
  Eigen::LLT<Matrix> llt(b);
  if (llt.info() == Eigen::Success) return llt.solve(rhs.transpose()).transpose();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(b);
  return cod.solve(rhs.transpose()).transpose();
}

Matrix with_ridge(Matrix gram, double ridge) {
  gram.diagonal().array() += ridge;
  return gram;
}

double rel_change(const Matrix& before, const Matrix& after) {
  const double diff = (after - before).norm();
  if (diff == 0.0) return 0.0;
  const double base = before.norm();
  return base > 0.0 ? diff / base : std::numeric_limits<double>::infinity();
}

double rel_change(const DenseTensor& before, const DenseTensor& after) {
  double diff = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double v = after[i] - before[i];
    diff += v * v;
  }
  if (diff == 0.0) return 0.0;
  const double base = before.frobenius_norm();
  return base > 0.0 ? std::sqrt(diff) / base : std::numeric_limits<double>::infinity();
}

Matrix select_columns(const Matrix& m, const std::vector<bool>& keep) {
  Eigen::Index n = 0;
  for (bool b : keep) n += b ? 1 : 0;
  Matrix out(m.rows(), n);
  Eigen::Index c = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.col(c++) = m.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

void mark_zero_columns(const Matrix& m, std::vector<bool>& keep) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (m.col(c).squaredNorm() == 0.0) keep[static_cast<std::size_t>(c)] = false;
  }
}

}  // namespace

Matrix trpca_x_update(const DenseTensor& d, const DenseTensor& e, const FactorSet& f, const Matrix& y,
                      const Matrix& z, std::size_t mode, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("trpca_x_update: mu must be positive");
  if (mode >= f.order()) throw std::out_of_range("trpca_x_update: mode out of range");
  if (!(d.shape() == e.shape()) || !(d.shape() == f.shape())) {
    throw std::invalid_argument("trpca_x_update: shape mismatch");
  }
  if (y.rows() != f[mode].rows() || y.cols() != f[mode].cols() || z.rows() != y.rows() || z.cols() != y.cols()) {
    throw std::invalid_argument("trpca_x_update: Y/Z size mismatch");
  }
  const Matrix rhs = mttkrp(d - e, f, mode) + mu * y + z;
  return solve_right_sym(rhs, with_ridge(khatri_rao_gram(f, mode), mu));
}

Matrix ridge_factor_update(const DenseTensor& target, const FactorSet& f, std::size_t mode, double ridge) {
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge_factor_update: negative ridge");
  if (mode >= f.order()) throw std::out_of_range("ridge_factor_update: mode out of range");
  return solve_right_sym(mttkrp(target, f, mode), with_ridge(khatri_rao_gram(f, mode), ridge));
}

DenseTensor sparse_update(const DenseTensor& d, const FactorSet& f, double lambda_e) {
  return soft_threshold_elem(d - cp_reconstruct(f), lambda_e);
}

double trpca_objective(const DenseTensor& d, const FactorSet& f, const DenseTensor& e, const TrpcaConfig& cfg,
                       TrpcaMethod method, double q) {
  const DenseTensor r = d - cp_reconstruct(f) - e;
  double value = 0.5 * simd::sum_squares(r.data());
  const double l1 = simd::sum_abs(e.data());
  if (l1 > 0.0) value += cfg.lambda_e * l1;
  if (cfg.lambda_x > 0.0) {
    double reg = 0.0;
    const double d_order = static_cast<double>(f.order());
    for (std::size_t j = 0; j < f.order(); ++j) {
      switch (method) {
        case TrpcaMethod::Admm:
          reg += column_power_sum(f[j], 1.0);
          break;
        case TrpcaMethod::Asymmetric:
          reg += j == 0 ? column_power_sum(f[j], q) / q : 0.5 * f[j].squaredNorm();
          break;
        case TrpcaMethod::Als:
          reg += f[j].squaredNorm() / d_order;
          break;
      }
    }
    value += cfg.lambda_x * reg;
  }
  return value;
}

double trpca_asym_exponent(const TrpcaConfig& cfg) {
  if (cfg.spec.kind() == RegKind::AsymmetricB) return cfg.spec.q();
  const double d = static_cast<double>(cfg.spec.order());
  const double inv_q = 1.0 / cfg.spec.p() - (d - 1.0) / 2.0;
  if (inv_q > 1.0) {
    const double q = 1.0 / inv_q;
    const double snapped = 1.0 / std::round(inv_q);
    return std::abs(q - snapped) < 1e-12 ? snapped : q;
  }
  return cfg.q;
}

TrpcaMethod trpca_method_for(const RegularizerSpec& spec) {
  if (spec.kind() == RegKind::SymmetricPd) {
    if (spec.q() == 1.0) return TrpcaMethod::Admm;
    if (spec.q() == 2.0) return TrpcaMethod::Als;
  }
  return TrpcaMethod::Asymmetric;
}

// ---------------------------------------------------------------- iterator

TrpcaIterator::TrpcaIterator(const DenseTensor& data, const TrpcaConfig& cfg, TrpcaMethod method)
    : d_(data), cfg_(cfg), method_(method) {
  cfg_.validate();
  if (cfg_.spec.order() != data.shape().order()) {
    throw std::invalid_argument("TrpcaIterator: regularizer order does not match the data");
  }
  if (method_ == TrpcaMethod::Asymmetric) {
    q_ = trpca_asym_exponent(cfg_);
    if (!(q_ > 0.0 && q_ < 1.0)) throw std::invalid_argument("TrpcaIterator: q must lie in (0, 1)");
  }
  x_ = init_factors(data.shape(), cfg_.k_init, cfg_.seed);
  e_ = DenseTensor::zeros(data.shape());
  const std::size_t splits = method_ == TrpcaMethod::Admm ? x_.order() : method_ == TrpcaMethod::Asymmetric ? 1 : 0;
  for (std::size_t j = 0; j < splits; ++j) {
    y_.push_back(x_[j]);
    z_.push_back(Matrix::Zero(x_[j].rows(), x_[j].cols()));
  }
}

double TrpcaIterator::objective() const { return trpca_objective(d_, x_, e_, cfg_, method_, q_); }

void TrpcaIterator::step() {
  const std::size_t order = x_.order();
  const std::vector<Matrix> before = x_.factors();
  const DenseTensor e_before = e_;
  const double mu = cfg_.mu;

  if (x_.rank() > 0) {
    const DenseTensor target = d_ - e_;
    for (std::size_t j = 0; j < order; ++j) {
      if (j < y_.size()) {
        x_.set(j, trpca_x_update(d_, e_, x_, y_[j], z_[j], j, mu));
        const Matrix v = x_[j] - z_[j] / mu;
        if (method_ == TrpcaMethod::Admm) {
          y_[j] = prox_group_soft(v, cfg_.lambda_x / mu);
        } else {
          y_[j] = cfg_.lambda_x == 0.0 ? v : prox_irls(v, q_, cfg_.lambda_x / (q_ * mu), cfg_.irls);
        }
        z_[j] += mu * (y_[j] - x_[j]);
      } else {
        const double ridge = method_ == TrpcaMethod::Als ? 2.0 * cfg_.lambda_x / static_cast<double>(order)
                                                         : cfg_.lambda_x;
        x_.set(j, ridge_factor_update(target, x_, j, ridge));
      }
    }
  }
  e_ = sparse_update(d_, x_, cfg_.lambda_e);
  ++iteration_;

  std::vector<bool> keep(x_.rank(), true);
  if (y_.empty()) {
    for (std::size_t j = 0; j < order; ++j) mark_zero_columns(x_[j], keep);
  } else {
    for (const Matrix& y : y_) mark_zero_columns(y, keep);
  }
  bool pruned = false;
  for (bool b : keep) pruned = pruned || !b;
  if (pruned) {
    x_ = x_.select_components(keep);
    for (Matrix& y : y_) y = select_columns(y, keep);
    for (Matrix& z : z_) z = select_columns(z, keep);
    // Dropped X columns need not be zero in the split methods; refit E to what remains.
    e_ = sparse_update(d_, x_, cfg_.lambda_e);
    change_ = std::numeric_limits<double>::infinity();
    return;
  }
  change_ = rel_change(e_before, e_);
  for (std::size_t j = 0; j < order; ++j) change_ = std::max(change_, rel_change(before[j], x_[j]));
}

// ---------------------------------------------------------------- solvers

namespace {

using Clock = std::chrono::steady_clock;

TrpcaResult run(const DenseTensor& d, const TrpcaConfig& cfg, TrpcaMethod method) {
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  TrpcaIterator it(d, cfg, method);

  SolveReport rep;
  rep.objective_trace.push_back(it.objective());
  rep.rank_trace.push_back(it.x().rank());
  rep.time_trace.push_back(elapsed());
  for (int t = 1; t <= cfg.t_max; ++t) {
    it.step();
    const double obj = it.objective();
    if (!std::isfinite(obj)) throw NumericError("trpca: objective became non-finite");
    rep.iterations = t;
    rep.objective_trace.push_back(obj);
    rep.rank_trace.push_back(it.x().rank());
    rep.time_trace.push_back(elapsed());
    if (it.last_change() < cfg.conv_tol || it.x().rank() == 0) {
      rep.converged = true;
      break;
    }
  }
  TrpcaResult out;
  out.report.factors = it.x();
  out.report.final_rank = it.x().rank();
  out.report.recovered = cp_reconstruct(it.x());
  out.report.objective_trace = std::move(rep.objective_trace);
  out.report.rank_trace = std::move(rep.rank_trace);
  out.report.time_trace = std::move(rep.time_trace);
  out.report.iterations = rep.iterations;
  out.report.converged = rep.converged;
  out.report.wall_time = elapsed();
  out.sparse = it.sparse();
  return out;
}

}  // namespace

TrpcaResult trpca_admm_solve(const DenseTensor& d, const TrpcaConfig& cfg) {
  if (trpca_method_for(cfg.spec) != TrpcaMethod::Admm) {
    throw std::invalid_argument("trpca_admm_solve: needs a symmetric spec with p d = 1");
  }
  return run(d, cfg, TrpcaMethod::Admm);
}

TrpcaResult trpca_asym_solve(const DenseTensor& d, const TrpcaConfig& cfg) {
  return run(d, cfg, TrpcaMethod::Asymmetric);
}

TrpcaResult trpca_als_solve(const DenseTensor& d, const TrpcaConfig& cfg) {
  if (trpca_method_for(cfg.spec) != TrpcaMethod::Als) {
    throw std::invalid_argument("trpca_als_solve: needs a symmetric spec with p d = 2");
  }
  return run(d, cfg, TrpcaMethod::Als);
}

TrpcaResult trpca_solve(const DenseTensor& d, const TrpcaConfig& cfg) {
  return run(d, cfg, trpca_method_for(cfg.spec));
}

SparsitySummary sparsity_summary(const DenseTensor& e, double tol) {
  SparsitySummary s;
  for (double v : e.data()) s.nnz += std::abs(v) > tol ? 1 : 0;
  s.fraction = e.size() == 0 ? 0.0 : static_cast<double>(s.nnz) / static_cast<double>(e.size());
  return s;
}

}  // namespace enr

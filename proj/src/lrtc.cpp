#include "enr/lrtc.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>

#include "enr/simd/kernels.hpp"

namespace enr {

void LrtcConfig::validate() const {
  if (k_init < 1) throw std::invalid_argument("LrtcConfig: k_init must be at least 1");
  if (t_max < 1) throw std::invalid_argument("LrtcConfig: t_max must be at least 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("LrtcConfig: lambda must be nonnegative");
  if (!(rho > 0.0)) throw std::invalid_argument("LrtcConfig: rho must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("LrtcConfig: delta must lie in [0, 1)");
  if (!(prune_tol >= 0.0)) throw std::invalid_argument("LrtcConfig: prune_tol must be nonnegative");
  if (!(conv_tol >= 0.0)) throw std::invalid_argument("LrtcConfig: conv_tol must be nonnegative");
  if (qn_memory < 1) throw std::invalid_argument("LrtcConfig: qn_memory must be at least 1");
}

// ---------------------------------------------------------------- problem

LrtcProblem::LrtcProblem(const DenseTensor& data, const ObservationMask& mask, double lambda,
                         RegularizerSpec spec)
    : entries_(data, mask), lambda_(lambda), spec_(std::move(spec)) {
  if (spec_.order() != data.shape().order()) {
    throw std::invalid_argument("LrtcProblem: regularizer order does not match the data");
  }
}

double LrtcProblem::loss(const FactorSet& f) const {
  const std::vector<double> r = entries_.residuals(f);
  return 0.5 * simd::sum_squares(r);
}

double LrtcProblem::penalty(const FactorSet& f) const {
  return lambda_ == 0.0 ? 0.0 : lambda_ * reg_value(f, spec_);
}

Matrix LrtcProblem::smooth_grad(const FactorSet& f, std::size_t mode) const {
  const std::vector<double> r = entries_.residuals(f);
  return -entries_.sparse_mttkrp(f, r, mode);
}

// ---------------------------------------------------------------- free functions

FactorSet init_factors(const Shape& shape, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("init_factors: k must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Matrix> factors;
  factors.reserve(shape.order());
  for (std::size_t n : shape.dims()) {
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = normal(rng);
      x.col(c).normalize();
    }
    factors.push_back(std::move(x));
  }
  return FactorSet(std::move(factors));
}

double objective(const DenseTensor& d, const ObservationMask& m, const FactorSet& f, double lambda,
                 const RegularizerSpec& spec) {
  if (!(d.shape() == m.shape()) || !(d.shape() == f.shape())) {
    throw std::invalid_argument("objective: shape mismatch");
  }
  return 0.5 * masked_residual(d, f, m).squared_norm + lambda * reg_value(f, spec);
}

Matrix smooth_grad(const DenseTensor& d, const ObservationMask& m, const FactorSet& f, std::size_t mode) {
  if (mode >= f.order()) throw std::out_of_range("smooth_grad: mode out of range");
  if (!(d.shape() == m.shape()) || !(d.shape() == f.shape())) {
    throw std::invalid_argument("smooth_grad: shape mismatch");
  }
  const ObservedEntries entries(d, m);
  const std::vector<double> r = entries.residuals(f);
  return -entries.sparse_mttkrp(f, r, mode);
}

double estimate_lipschitz(const FactorSet& f, std::size_t mode, std::size_t observed, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("estimate_lipschitz: rho must be positive");
  const double fraction = static_cast<double>(observed) / static_cast<double>(f.shape().numel());
  const double sigma2 = largest_eigenvalue_psd(khatri_rao_gram(f, mode)).value;
  return std::max(rho * std::sqrt(fraction) * sigma2, 1e-12);
}

double extrapolation_weight(double l_prev, double l_curr, int t, double delta) {
  if (t <= 2) return 0.0;
  if (!(l_prev > 0.0 && l_curr > 0.0)) throw std::invalid_argument("extrapolation_weight: L must be positive");
  return delta * std::sqrt(l_prev / l_curr);
}

// ---------------------------------------------------------------- shared solver pieces

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool converged_rel(double before, double after, double tol) {
  return std::abs(before - after) <= tol * std::max(std::abs(before), std::numeric_limits<double>::min());
}

// Keep components whose columns all have norm > tol (tol = 0 drops exact zeros).
double finite_or_throw(double objective) {
  if (!std::isfinite(objective)) throw NumericError("lrtc: objective became non-finite");
  return objective;
}

std::vector<bool> surviving_components(const FactorSet& f, double tol) {
  std::vector<bool> keep(f.rank(), true);
  for (std::size_t j = 0; j < f.order(); ++j) {
    const Vector norms = f.column_norms(j);
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
      if (!(norms(i) > tol)) keep[static_cast<std::size_t>(i)] = false;
    }
  }
  return keep;
}

bool all_true(const std::vector<bool>& v) {
  for (bool b : v) {
    if (!b) return false;
  }
  return true;
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

void finish_report(SolveReport& rep, FactorSet factors, Clock::time_point start) {
  rep.final_rank = factors.rank();
  rep.recovered = cp_reconstruct(factors);
  rep.factors = std::move(factors);
  rep.wall_time = seconds_since(start);
}

// argmin_X L/2 ||X - G||^2 + weight * sum_i ||x_i||^e for one factor.
Matrix prox_mode(const Matrix& g, double lipschitz, double weight, double exponent, const IrlsOptions& irls) {
  if (weight == 0.0) return g;
  if (exponent == 1.0) return prox_group_soft(g, weight / lipschitz);
  if (exponent == 2.0) return prox_ridge_scale(g, lipschitz, weight);
  if (exponent < 1.0) return prox_irls(g, exponent, weight / lipschitz, irls);

  // Smooth but not quadratic: a few gradient steps with backtracking.
  const ModeTerm term{weight, exponent};
  auto phi = [&](const Matrix& x) {
    return 0.5 * lipschitz * (x - g).squaredNorm() + weight * column_power_sum(x, exponent);
  };
  Matrix x = g;
  double fx = phi(x);
  for (int step = 0; step < 5; ++step) {
    const Matrix grad = lipschitz * (x - g) + reg_mode_gradient(x, term);
    const double gsq = grad.squaredNorm();
    if (gsq == 0.0) break;
    double alpha = 1.0 / lipschitz;
    bool moved = false;
    for (int trial = 0; trial < 30; ++trial) {
      Matrix cand = x - alpha * grad;
      const double fc = phi(cand);
      if (fc <= fx - 1e-4 * alpha * gsq) {
        x = std::move(cand);
        fx = fc;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace

// ---------------------------------------------------------------- BCDE

SolveReport bcde_solve(const DenseTensor& d, const ObservationMask& m, const LrtcConfig& cfg) {
  cfg.validate();
  if (m.empty()) throw std::invalid_argument("bcde_solve: empty mask");
  const auto start = Clock::now();
  const LrtcProblem problem(d, m, cfg.lambda, cfg.spec);
  const std::size_t order = d.shape().order();
  constexpr int kMaxRetries = 40;

  FactorSet x = init_factors(d.shape(), cfg.k_init, cfg.seed);
  std::vector<Matrix> prev = x.factors();
  // Per-mode Lipschitz history: [0] two iterations back, [1] previous iteration.
  std::vector<std::array<double, 2>> lhist(order, {0.0, 0.0});

  SolveReport rep;
  double obj = problem.objective(x);
  rep.objective_trace.push_back(finite_or_throw(obj));
  rep.rank_trace.push_back(x.rank());
  rep.time_trace.push_back(seconds_since(start));

  for (int t = 1; t <= cfg.t_max; ++t) {
    if (x.rank() == 0) {
      rep.converged = true;
      break;
    }
    double multiplier = 1.0;
    bool extrapolate = cfg.delta > 0.0;
    bool accepted = false;
    FactorSet trial;
    std::vector<double> lused(order);
    double trial_obj = obj;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
      trial = x;
      for (std::size_t j = 0; j < order; ++j) {
        const double omega = extrapolate ? extrapolation_weight(lhist[j][0], lhist[j][1], t, cfg.delta) : 0.0;
        const Matrix xhat = omega == 0.0 ? trial[j] : Matrix(trial[j] + omega * (trial[j] - prev[j]));
        const double lip = estimate_lipschitz(trial, j, problem.observed(), cfg.rho) * multiplier;
        trial.set(j, xhat);
        const Matrix g = xhat - problem.smooth_grad(trial, j) / lip;
        const ModeTerm term = cfg.spec.mode_term(j);
        trial.set(j, prox_mode(g, lip, cfg.lambda * term.coefficient, term.exponent, cfg.irls));
        lused[j] = lip;
      }
      trial_obj = problem.objective(trial);
      if (trial_obj <= obj) {
        accepted = true;
        break;
      }
      multiplier *= 2.0;
      extrapolate = false;
    }
    if (!accepted) {
      // No descent even with heavily damped steps: keep the current iterate.
      rep.converged = true;
      break;
    }

    prev = x.factors();
    x = std::move(trial);
    for (std::size_t j = 0; j < order; ++j) lhist[j] = {lhist[j][1], lused[j]};

    const std::vector<bool> keep = surviving_components(x, 0.0);
    if (!all_true(keep)) {
      x = x.select_components(keep);
      for (Matrix& p : prev) p = select_columns(p, keep);
    }

    rep.iterations = t;
    rep.objective_trace.push_back(finite_or_throw(trial_obj));
    rep.rank_trace.push_back(x.rank());
    rep.time_trace.push_back(seconds_since(start));
    const bool done = converged_rel(obj, trial_obj, cfg.conv_tol);
    obj = trial_obj;
    if (done) {
      rep.converged = true;
      break;
    }
  }
  finish_report(rep, std::move(x), start);
  return rep;
}

// ---------------------------------------------------------------- quasi-Newton

namespace {

Vector flatten(const FactorSet& f) {
  Eigen::Index total = 0;
  for (const Matrix& m : f.factors()) total += m.size();
  Vector v(total);
  Eigen::Index pos = 0;
  for (const Matrix& m : f.factors()) {
    v.segment(pos, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    pos += m.size();
  }
  return v;
}

FactorSet unflatten(const Vector& v, const Shape& shape, std::size_t k) {
  std::vector<Matrix> factors;
  Eigen::Index pos = 0;
  for (std::size_t n : shape.dims()) {
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(k);
    factors.push_back(Eigen::Map<const Matrix>(v.data() + pos, rows, cols));
    pos += rows * cols;
  }
  return FactorSet(std::move(factors));
}

struct Evaluation {
  double value = 0.0;
  Vector grad;
};

Evaluation evaluate(const LrtcProblem& problem, const FactorSet& f) {
  Evaluation ev;
  ev.value = problem.objective(f);
  std::vector<Matrix> grads;
  grads.reserve(f.order());
  for (std::size_t j = 0; j < f.order(); ++j) {
    Matrix g = problem.smooth_grad(f, j);
    if (problem.lambda() != 0.0) {
      const ModeTerm term = problem.spec().mode_term(j);
      g += problem.lambda() * reg_mode_gradient(f[j], term);
    }
    grads.push_back(std::move(g));
  }
  ev.grad = flatten(FactorSet(std::move(grads)));
  return ev;
}

}  // namespace

SolveReport quasi_newton_solve(const DenseTensor& d, const ObservationMask& m, const LrtcConfig& cfg) {
  cfg.validate();
  if (m.empty()) throw std::invalid_argument("quasi_newton_solve: empty mask");
  const auto start = Clock::now();
  const LrtcProblem problem(d, m, cfg.lambda, cfg.spec);
  const Shape& shape = d.shape();
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxTrials = 30;

  FactorSet f = init_factors(shape, cfg.k_init, cfg.seed);
  Vector x = flatten(f);
  Evaluation cur = evaluate(problem, f);
  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;

  SolveReport rep;
  rep.objective_trace.push_back(finite_or_throw(cur.value));
  rep.rank_trace.push_back(f.rank());
  rep.time_trace.push_back(seconds_since(start));

  auto two_loop = [&](const Vector& g) {
    Vector q = g;
    const std::size_t mem = s_hist.size();
    std::vector<double> alpha(mem);
    std::vector<double> rho_inv(mem);
    for (std::size_t i = mem; i-- > 0;) {
      rho_inv[i] = y_hist[i].dot(s_hist[i]);
      alpha[i] = s_hist[i].dot(q) / rho_inv[i];
      q -= alpha[i] * y_hist[i];
    }
    const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Vector r = gamma * q;
    for (std::size_t i = 0; i < mem; ++i) {
      const double beta = y_hist[i].dot(r) / rho_inv[i];
      r += (alpha[i] - beta) * s_hist[i];
    }
    return Vector(-r);
  };

  for (int t = 1; t <= cfg.t_max; ++t) {
    if (f.rank() == 0 || cur.grad.lpNorm<Eigen::Infinity>() == 0.0) {
      rep.converged = true;
      break;
    }

    Vector dir = s_hist.empty() ? Vector(-cur.grad) : two_loop(cur.grad);
    bool steepest = s_hist.empty();
    double gtd = cur.grad.dot(dir);
    if (!(gtd < 0.0) || !dir.allFinite()) {
      dir = -cur.grad;
      gtd = -cur.grad.squaredNorm();
      steepest = true;
    }

    auto line_search = [&](const Vector& direction, double slope, double alpha, Vector& x_new,
                           FactorSet& f_new, Evaluation& ev_new) {
      for (int trial = 0; trial < kMaxTrials; ++trial) {
        x_new = x + alpha * direction;
        if (x_new.allFinite()) {
          f_new = unflatten(x_new, shape, f.rank());
          const double value = problem.objective(f_new);
          if (value <= cur.value + kArmijo * alpha * slope) {
            ev_new = evaluate(problem, f_new);
            return true;
          }
        }
        alpha *= 0.5;
      }
      return false;
    };

    const double first_step = std::min(1.0, 1.0 / cur.grad.lpNorm<1>());
    Vector x_new;
    FactorSet f_new;
    Evaluation next;
    bool ok = line_search(dir, gtd, steepest ? first_step : 1.0, x_new, f_new, next);
    if (!ok && !steepest) {
      s_hist.clear();
      y_hist.clear();
      dir = -cur.grad;
      ok = line_search(dir, -cur.grad.squaredNorm(), first_step, x_new, f_new, next);
    }
    if (!ok) {
      rep.converged = true;
      break;
    }

    const Vector s = x_new - x;
    const Vector y = next.grad - cur.grad;
    if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > cfg.qn_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double before = cur.value;
    x = std::move(x_new);
    f = std::move(f_new);
    cur = std::move(next);

    const std::vector<bool> keep = surviving_components(f, cfg.prune_tol);
    if (!all_true(keep)) {
      f = f.select_components(keep);
      x = flatten(f);
      cur = evaluate(problem, f);
      s_hist.clear();
      y_hist.clear();
    }

    rep.iterations = t;
    rep.objective_trace.push_back(finite_or_throw(cur.value));
    rep.rank_trace.push_back(f.rank());
    rep.time_trace.push_back(seconds_since(start));
    if (converged_rel(before, cur.value, cfg.conv_tol)) {
      rep.converged = true;
      break;
    }
  }
  finish_report(rep, std::move(f), start);
  return rep;
}

SolveReport lrtc_solve(const DenseTensor& d, const ObservationMask& m, const LrtcConfig& cfg) {
  return cfg.solver == LrtcSolver::Bcde ? bcde_solve(d, m, cfg) : quasi_newton_solve(d, m, cfg);
}

}  // namespace enr

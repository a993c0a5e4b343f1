// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "enr/harness.hpp"
#include "enr/lrtc.hpp"
#include "enr/regularizers.hpp"
#include "enr/trpca.hpp"
#include "helpers.hpp"

using namespace enr;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates failures without stopping at the first one.
struct Checker {
  bool ok = true;
  std::ostringstream notes;
  std::size_t checks = 0;
  void expect(bool cond, const std::string& what) {
    ++checks;
    if (!cond && ok) notes << "first failure: " << what << "; ";
    ok = ok && cond;
  }
  Outcome done(const std::string& extra = "") {
    std::ostringstream out;
    out << checks << " checks; " << notes.str() << extra;
    return {ok, out.str()};
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome identity_suite() {
  Checker c;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kdist(1, 8);
  std::uniform_real_distribution<double> logscale(-2.0, 2.0);
  double worst_eq = 0.0;
  for (std::size_t d : {3u, 4u}) {
    for (const RegularizerSpec& spec : testutil::specs_for(d)) {
      for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::size_t> dims(d);
        for (std::size_t j = 0; j < d; ++j) dims[j] = 2 + (j + static_cast<std::size_t>(trial)) % 4;
        FactorSet f = testutil::random_factors(rng, dims, static_cast<std::size_t>(kdist(rng)));
        for (std::size_t j = 0; j < d; ++j) f.set(j, f[j] * std::exp(logscale(rng)));
        const double target = testutil::component_power_sum(f, spec.p());
        c.expect(reg_value(f, spec) >= target - 1e-12 * target, spec.to_string() + " inequality");
        const double balanced = reg_value(balance_factors(f, spec), spec);
        const double rel = std::abs(balanced - target) / target;
        worst_eq = std::max(worst_eq, rel);
        c.expect(rel <= 1e-10, spec.to_string() + " equality");
      }
    }
  }
  return c.done("worst equality gap " + fmt(worst_eq));
}

// ---------------------------------------------------------------- 2

// Nested golden-section search; exact for the convex 2-D subproblems.
Matrix golden_2d(const std::function<double(double, double)>& f, double lo, double hi) {
  auto inner = [&](double a) {
    const double b = testutil::golden_min([&](double v) { return f(a, v); }, lo, hi, 120);
    return std::make_pair(b, f(a, b));
  };
  const double a = testutil::golden_min([&](double v) { return inner(v).second; }, lo, hi, 120);
  Matrix out(2, 1);
  out << a, inner(a).first;
  return out;
}

// Polar scan for the nonconvex IRLS subproblem: angle grid, radial grid search.
Matrix polar_2d(const std::function<double(const Matrix&)>& f, double rmax) {
  Matrix best = Matrix::Zero(2, 1);
  double fbest = f(best);
  const int angles = 720;
  for (int a = 0; a < angles; ++a) {
    const double th = 2.0 * M_PI * a / angles;
    Matrix dir(2, 1);
    dir << std::cos(th), std::sin(th);
    const double r = testutil::grid_min([&](double s) { return f(s * dir); }, 0.0, rmax, 400);
    if (f(r * dir) < fbest) {
      fbest = f(r * dir);
      best = r * dir;
    }
  }
  // refine the angle around the best direction
  const double r0 = best.norm();
  if (r0 > 0.0) {
    const double th0 = std::atan2(best(1, 0), best(0, 0));
    const double step = 2.0 * M_PI / angles;
    auto at = [&](double th, double r) {
      Matrix m(2, 1);
      m << r * std::cos(th), r * std::sin(th);
      return m;
    };
    const double th = testutil::golden_min(
        [&](double t) {
          const double r = testutil::golden_min([&](double s) { return f(at(t, s)); }, 0.5 * r0, 1.5 * r0 + 1e-9);
          return f(at(t, r));
        },
        th0 - step, th0 + step);
    const double r = testutil::golden_min([&](double s) { return f(at(th, s)); }, 0.5 * r0, 1.5 * r0 + 1e-9);
    if (f(at(th, r)) < fbest) best = at(th, r);
  }
  return best;
}

Outcome prox_oracles() {
  Checker c;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    const bool two = trial % 2 == 1;
    const Matrix y = testutil::random_matrix(rng, two ? 2 : 1, 1) * 1.5;

    const double tau = 2.0 * unif(rng);
    Matrix g_oracle;
    if (two) {
      g_oracle = golden_2d([&](double a, double b) {
        return 0.5 * ((y(0, 0) - a) * (y(0, 0) - a) + (y(1, 0) - b) * (y(1, 0) - b)) + tau * std::hypot(a, b);
      }, -6.0, 6.0);
    } else {
      g_oracle = Matrix::Constant(1, 1, testutil::grid_min(
          [&](double a) { return 0.5 * (y(0, 0) - a) * (y(0, 0) - a) + tau * std::abs(a); }, -6.0, 6.0));
    }
    worst[0] = std::max(worst[0], (prox_group_soft(y, tau) - g_oracle).norm());

    const double lip = 0.1 + 4.0 * unif(rng);
    const double lam = 3.0 * unif(rng);
    Matrix r_oracle;
    auto ridge = [&](double a, double b) {
      const double r0 = y(0, 0) - a;
      const double r1 = two ? y(1, 0) - b : 0.0;
      return 0.5 * lip * (r0 * r0 + r1 * r1) + lam * (a * a + (two ? b * b : 0.0));
    };
    if (two) {
      r_oracle = golden_2d(ridge, -6.0, 6.0);
    } else {
      r_oracle = Matrix::Constant(1, 1, testutil::golden_min([&](double a) { return ridge(a, 0.0); }, -6.0, 6.0));
    }
    worst[1] = std::max(worst[1], (prox_ridge_scale(y, lip, lam) - r_oracle).norm());

    const double v = y(0, 0);
    const double st = testutil::grid_min([&](double e) { return 0.5 * (v - e) * (v - e) + tau * std::abs(e); },
                                         -6.0, 6.0);
    worst[2] = std::max(worst[2], std::abs(soft_threshold_elem(DenseTensor(Shape{1, 1}, {v}), tau)[0] - st));

    const double q = trial % 4 < 2 ? 0.5 : 1.0 / 3.0;
    const double lq = 0.02 + unif(rng);
    auto irls_obj = [&](const Matrix& x) { return 0.5 * (y - x).squaredNorm() + lq * std::pow(x.norm(), q); };
    Matrix i_oracle;
    if (two) {
      i_oracle = polar_2d(irls_obj, y.norm() + 1.0);
    } else {
      const double a = testutil::grid_min([&](double s) { return irls_obj(Matrix::Constant(1, 1, s)); },
                                          -std::abs(v) - 1.0, std::abs(v) + 1.0);
      i_oracle = Matrix::Constant(1, 1, a);
    }
    worst[3] = std::max(worst[3], (prox_irls(y, q, lq) - i_oracle).norm());
  }
  c.expect(worst[0] < 1e-4, "prox_group_soft");
  c.expect(worst[1] < 1e-4, "prox_ridge_scale");
  c.expect(worst[2] < 1e-4, "soft_threshold_elem");
  c.expect(worst[3] < 1e-3, "prox_irls");
  return c.done("max deviations group=" + fmt(worst[0]) + " ridge=" + fmt(worst[1]) + " soft=" + fmt(worst[2]) +
                " irls=" + fmt(worst[3]));
}

// ---------------------------------------------------------------- 3

Outcome gradient_check() {
  Checker c;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const FactorSet f = testutil::random_factors(rng, {4, 5, 6}, 3);
    const DenseTensor d = testutil::random_tensor(rng, Shape{4, 5, 6});
    const ObservationMask m = sample_mask(d.shape(), 0.4, static_cast<std::uint64_t>(trial));
    auto loss = [&](const FactorSet& g) { return 0.5 * masked_residual(d, g, m).squared_norm; };
    for (std::size_t j = 0; j < 3; ++j) {
      const Matrix g = smooth_grad(d, m, f, j);
      Matrix fd(g.rows(), g.cols());
      const double h = 1e-6;
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index k = 0; k < g.cols(); ++k) {
          FactorSet a = f, b = f;
          Matrix xa = f[j], xb = f[j];
          xa(r, k) += h;
          xb(r, k) -= h;
          a.set(j, xa);
          b.set(j, xb);
          fd(r, k) = (loss(a) - loss(b)) / (2.0 * h);
        }
      }
      const double rel = testutil::rel_diff(g, fd);
      worst = std::max(worst, rel);
      c.expect(rel < 1e-6, "mode " + std::to_string(j));
    }
  }
  return c.done("worst relative error " + fmt(worst));
}

// ---------------------------------------------------------------- 4

Outcome exact_fit() {
  Checker c;
  const Shape s{10, 10, 10};
  const DenseTensor t = random_cp_tensor(s, 1, WeightsMode::Unit, 42);
  const ObservationMask full = ObservationMask::full(s);
  std::ostringstream info;
  for (LrtcSolver solver : {LrtcSolver::Bcde, LrtcSolver::QuasiNewton}) {
    LrtcConfig cfg;
    cfg.k_init = 2;
    cfg.lambda = 0.0;
    cfg.t_max = 200;
    cfg.solver = solver;
    const SolveReport r = lrtc_solve(t, full, cfg);
    const double err = *relative_error(t, r.recovered);
    const std::string name = solver == LrtcSolver::Bcde ? "bcde" : "lbfgs";
    info << name << "=" << fmt(err) << "/" << r.iterations << "it ";
    c.expect(err < 1e-4 && r.iterations <= 200, name);
  }
  for (const char* reg : {"sym:p=1/3", "asym_b:q=1/2", "sym:p=2/3"}) {
    TrpcaConfig cfg;
    cfg.spec = RegularizerSpec::parse(reg, 3);
    cfg.k_init = 2;
    cfg.lambda_x = 0.0;
    cfg.lambda_e = 1e6;
    cfg.mu = 1.0;
    const TrpcaResult r = trpca_solve(t, cfg);
    const double err = *relative_error(t, r.report.recovered);
    info << reg << "=" << fmt(err) << " ";
    c.expect(err < 1e-4, reg);
    c.expect(sparsity_summary(r.sparse).nnz == 0, std::string(reg) + " sparse part");
  }
  return c.done(info.str());
}

// ---------------------------------------------------------------- 5-7

ExperimentSpec lrtc_desk(double missing) {
  ExperimentSpec spec;
  spec.task = Task::Lrtc;
  spec.shape = Shape{30, 30, 30};
  spec.true_rank = 5;
  spec.noise_level = 0.1;
  spec.rate = missing;
  spec.lrtc.k_init = 10;
  spec.lrtc.spec = RegularizerSpec::symmetric(3, 1.0 / 3.0);
  spec.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  spec.threads = 0;
  return spec;
}

std::optional<LambdaSummary> tuned(ExperimentSpec spec) {
  spec.lambdas.clear();
  return best_lambda(run_experiment(spec));
}

Outcome regularization_helps() {
  Checker c;
  ExperimentSpec spec = lrtc_desk(0.7);
  const auto best = tuned(spec);
  spec.lambdas = {0.0};
  const auto zero = best_lambda(run_experiment(spec));
  c.expect(best && zero, "runs succeeded");
  if (!best || !zero) return c.done();
  c.expect(best->mean_error < zero->mean_error, "tuned error below lambda = 0");
  return c.done("lambda=0 mean " + fmt(zero->mean_error) + ", tuned lambda " + fmt(best->lambda) + " mean " +
                fmt(best->mean_error));
}

Outcome p_trend() {
  Checker c;
  ExperimentSpec spec = lrtc_desk(0.9);
  const auto third = tuned(spec);
  spec.lrtc.spec = RegularizerSpec::symmetric(3, 1.0);
  const auto one = tuned(spec);
  c.expect(third && one, "runs succeeded");
  if (!third || !one) return c.done();
  c.expect(third->mean_error <= one->mean_error, "p = 1/3 not worse than p = 1");
  return c.done("p=1/3 mean " + fmt(third->mean_error) + " at " + fmt(third->lambda) + ", p=1 mean " +
                fmt(one->mean_error) + " at " + fmt(one->lambda));
}

Outcome adaptive_rank() {
  Checker c;
  ExperimentSpec spec = lrtc_desk(0.5);
  spec.lrtc.k_init = 2 * spec.true_rank;
  const std::vector<RunResult> res = run_experiment(spec);
  const auto best = best_lambda(res);
  c.expect(best.has_value(), "runs succeeded");
  if (!best) return c.done();
  std::vector<std::size_t> ranks;
  for (const RunResult& r : res) {
    if (r.lambda == best->lambda && r.error.empty()) ranks.push_back(r.final_rank);
  }
  std::sort(ranks.begin(), ranks.end());
  std::ostringstream list;
  for (std::size_t r : ranks) list << r << ' ';
  c.expect(ranks.size() == 10, "all ten seeds ran");
  for (std::size_t r : ranks) c.expect(r >= spec.true_rank && r <= 2 * spec.true_rank, "rank in [r, 2r]");
  const std::size_t median = ranks.empty() ? 0 : ranks[(ranks.size() - 1) / 2];
  const std::size_t upper_median = ranks.empty() ? 0 : ranks[ranks.size() / 2];
  c.expect(median == spec.true_rank && upper_median == spec.true_rank, "median rank equals r");
  return c.done("tuned lambda " + fmt(best->lambda) + ", mean error " + fmt(best->mean_error) + ", ranks " +
                list.str() + "median " + std::to_string(median));
}

// ---------------------------------------------------------------- 8

Outcome trpca_ablation() {
  Checker c;
  ExperimentSpec spec;
  spec.task = Task::Trpca;
  spec.shape = Shape{30, 30, 30};
  spec.true_rank = 5;
  spec.noise_level = 0.1;
  spec.rate = 0.1;
  spec.weights = WeightsMode::Linear;
  spec.trpca.k_init = 10;
  spec.trpca.lambda_e = 0.25;
  spec.seeds = {0, 1, 2, 3, 4};
  std::ostringstream info;
  for (const char* reg : {"sym:p=1/3", "asym_b:q=1/2"}) {
    spec.trpca.spec = RegularizerSpec::parse(reg, 3);
    spec.trpca.lambda_e = 0.25;
    const auto enr = tuned(spec);
    spec.trpca.lambda_e = 0.0;
    const auto literal = tuned(spec);
    spec.trpca.lambda_e = kInf;
    const auto no_sparse = tuned(spec);
    c.expect(enr && literal && no_sparse, std::string(reg) + " runs succeeded");
    if (!enr || !literal || !no_sparse) continue;
    c.expect(enr->mean_error <= 0.5 * literal->mean_error, std::string(reg) + " vs lambda_e = 0");
    c.expect(enr->mean_error <= 0.5 * no_sparse->mean_error, std::string(reg) + " vs E = 0");
    info << reg << ": enr " << fmt(enr->mean_error) << " (lambda_x " << fmt(enr->lambda) << "), lambda_e=0 "
         << fmt(literal->mean_error) << ", E=0 " << fmt(no_sparse->mean_error) << "; ";
  }
  return c.done(info.str());
}

// ---------------------------------------------------------------- 9

Outcome solver_contracts() {
  Checker c;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> dim(3, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape s{static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng)),
                  static_cast<std::size_t>(dim(rng))};
    const TrpcaData data = gen_trpca_data(s, 2, 0.1, 0.1, WeightsMode::Linear, Corruption::Additive,
                                          static_cast<std::uint64_t>(trial));
    TrpcaConfig cfg;
    cfg.spec = RegularizerSpec::symmetric(3, 2.0 / 3.0);
    cfg.k_init = 4;
    cfg.lambda_x = 2.0 * unif(rng);
    cfg.lambda_e = 0.05 + unif(rng);
    cfg.t_max = 100;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const TrpcaResult r = trpca_als_solve(data.corrupted, cfg);
    const auto& tr = r.report.objective_trace;
    for (std::size_t i = 1; i < tr.size(); ++i) c.expect(tr[i] <= tr[i - 1] * (1.0 + 1e-12), "als monotone");

    const LrtcData ld = gen_lrtc_data(s, 2, 0.1, 0.5, WeightsMode::Unit, static_cast<std::uint64_t>(trial));
    LrtcConfig lc;
    lc.delta = 0.0;
    lc.k_init = 4;
    lc.lambda = 2.0 * unif(rng);
    lc.spec = testutil::specs_for(3)[static_cast<std::size_t>(trial) % testutil::specs_for(3).size()];
    lc.t_max = 100;
    lc.seed = static_cast<std::uint64_t>(trial);
    const SolveReport b = bcde_solve(ld.observed, ld.mask, lc);
    for (std::size_t i = 1; i < b.objective_trace.size(); ++i) {
      c.expect(b.objective_trace[i] <= b.objective_trace[i - 1], "bcde monotone (" + lc.spec.to_string() + ")");
    }

    TrpcaConfig ac;
    ac.spec = RegularizerSpec::symmetric(3, 1.0 / 3.0);
    ac.k_init = 4;
    ac.lambda_x = unif(rng);
    ac.mu = 0.5 + 10.0 * unif(rng);
    TrpcaIterator it(data.corrupted, ac, TrpcaMethod::Admm);
    it.step();
    for (std::size_t j = 0; j < it.z().size(); ++j) {
      const Matrix expect = ac.mu * (it.y()[j] - it.x()[j]);
      c.expect(it.z()[j] == expect, "admm dual step");
    }
  }
  return c.done();
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion all[] = {
      {1, "regularizer identity suite", 5.0, identity_suite},
      {2, "prox oracle equivalence", 10.0, prox_oracles},
      {3, "gradient correctness", 5.0, gradient_check},
      {4, "exact-fit sanity", 10.0, exact_fit},
      {5, "regularization helps", 300.0, regularization_helps},
      {6, "p-monotonicity trend", 600.0, p_trend},
      {7, "adaptive rank", 600.0, adaptive_rank},
      {8, "trpca ablation", 300.0, trpca_ablation},
      {9, "solver contracts", 60.0, solver_contracts},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& cr : all) {
    if (!wanted.empty() && wanted.count(cr.id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < cr.limit_seconds;
    const bool pass = out.pass && in_time;
    std::printf("criterion %d %s: %s (%.1fs of %.0fs%s) %s\n", cr.id, cr.name, pass ? "PASS" : "FAIL", secs,
                cr.limit_seconds, in_time ? "" : ", too slow", out.detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "enr/harness.hpp"
#include "enr/lrtc.hpp"
#include "helpers.hpp"

using namespace enr;

namespace {

double smooth_loss(const DenseTensor& d, const ObservationMask& m, const FactorSet& f) {
  return 0.5 * masked_residual(d, f, m).squared_norm;
}

Matrix fd_grad(const DenseTensor& d, const ObservationMask& m, const FactorSet& f, std::size_t mode, double h) {
  Matrix g(f[mode].rows(), f[mode].cols());
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      FactorSet a = f, b = f;
      Matrix xa = f[mode], xb = f[mode];
      xa(r, c) += h;
      xb(r, c) -= h;
      a.set(mode, xa);
      b.set(mode, xb);
      g(r, c) = (smooth_loss(d, m, a) - smooth_loss(d, m, b)) / (2 * h);
    }
  }
  return g;
}

bool non_increasing(const std::vector<double>& trace, double rel_slack) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1] + rel_slack * std::abs(trace[i - 1])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("objective values") {
  std::mt19937_64 rng(1);
  const FactorSet f = testutil::random_factors(rng, {2, 2, 2}, 2);
  const DenseTensor t = cp_reconstruct(f);
  const ObservationMask full = ObservationMask::full(t.shape());
  const RegularizerSpec spec = RegularizerSpec::symmetric(3, 1.0 / 3.0);
  CHECK(objective(t, full, f, 0.0, spec) == doctest::Approx(0.0));
  CHECK(objective(t, full, f, 0.7, spec) == doctest::Approx(0.7 * reg_value(f, spec)));
  DenseTensor d = t;
  d[3] += 3.0;
  CHECK(objective(d, ObservationMask(t.shape(), {3}), f, 0.0, spec) == doctest::Approx(4.5));
  CHECK_THROWS(objective(d, ObservationMask::full(Shape{2, 2, 3}), f, 0.0, spec));
}

TEST_CASE("smooth gradient matches central differences") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const FactorSet f = testutil::random_factors(rng, {4, 5, 6}, 3);
    const DenseTensor d = testutil::random_tensor(rng, Shape{4, 5, 6});
    const ObservationMask m = sample_mask(d.shape(), trial % 2 == 0 ? 0.0 : 0.5, static_cast<std::uint64_t>(trial));
    for (std::size_t j = 0; j < 3; ++j) {
      const Matrix g = smooth_grad(d, m, f, j);
      CHECK(testutil::rel_diff(g, fd_grad(d, m, f, j, 1e-6)) < 1e-6);
    }
  }
}

TEST_CASE("smooth gradient agrees with the dense formula and vanishes when it should") {
  std::mt19937_64 rng(3);
  const FactorSet f = testutil::random_factors(rng, {3, 4, 5}, 2);
  const DenseTensor d = testutil::random_tensor(rng, Shape{3, 4, 5});
  const ObservationMask m = sample_mask(d.shape(), 0.4, 9);
  const DenseTensor ind = m.indicator();
  for (std::size_t j = 0; j < 3; ++j) {
    const Matrix kr = khatri_rao(f, j);
    const Matrix resid = unfold(ind, j).cwiseProduct(unfold(d, j) - f[j] * kr.transpose());
    CHECK(testutil::rel_diff(smooth_grad(d, m, f, j), -resid * kr) < 1e-12);
  }
  CHECK(smooth_grad(cp_reconstruct(f), m, f, 1).norm() < 1e-12);
  CHECK(smooth_grad(d, ObservationMask(d.shape(), {}), f, 1).isZero());
  CHECK_THROWS_AS(smooth_grad(d, m, f, 3), std::out_of_range);
}

TEST_CASE("lipschitz estimate") {
  std::mt19937_64 rng(4);
  const FactorSet f = testutil::random_factors(rng, {4, 5, 6}, 3);
  const double s = Eigen::JacobiSVD<Matrix>(khatri_rao(f, 1)).singularValues()(0);
  CHECK(estimate_lipschitz(f, 1, 120, 1.0) == doctest::Approx(s * s).epsilon(1e-5));
  CHECK(estimate_lipschitz(f, 1, 30, 2.0) == doctest::Approx(2.0 * 0.5 * s * s).epsilon(1e-5));
  CHECK(estimate_lipschitz(f, 1, 120, 0.5) == doctest::Approx(0.5 * s * s).epsilon(1e-5));
  CHECK(estimate_lipschitz(FactorSet::zeros(Shape{4, 5, 6}, 2), 0, 120, 1.0) == 1e-12);
  CHECK_THROWS(estimate_lipschitz(f, 0, 10, 0.0));
}

TEST_CASE("extrapolation weight") {
  CHECK(extrapolation_weight(1.0, 1.0, 1, 0.95) == 0.0);
  CHECK(extrapolation_weight(1.0, 1.0, 2, 0.95) == 0.0);
  CHECK(extrapolation_weight(2.0, 2.0, 3, 0.95) == doctest::Approx(0.95));
  CHECK(extrapolation_weight(4.0, 1.0, 3, 0.95) == doctest::Approx(1.9));
}

TEST_CASE("initial factors") {
  const FactorSet f = init_factors(Shape{50, 40, 30}, 20, 7);
  CHECK(f.rank() == 20);
  for (std::size_t j = 0; j < 3; ++j) {
    for (Eigen::Index c = 0; c < 20; ++c) CHECK(f[j].col(c).norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  const FactorSet g = init_factors(Shape{50, 40, 30}, 20, 7);
  for (std::size_t j = 0; j < 3; ++j) CHECK(f[j] == g[j]);
  CHECK_THROWS(init_factors(Shape{3, 3}, 0, 1));
}

TEST_CASE("both solvers fit a noiseless rank-1 tensor") {
  const Shape s{10, 10, 10};
  const DenseTensor t = random_cp_tensor(s, 1, WeightsMode::Unit, 0);
  const ObservationMask m = ObservationMask::full(s);
  for (LrtcSolver solver : {LrtcSolver::Bcde, LrtcSolver::QuasiNewton}) {
    LrtcConfig cfg;
    cfg.k_init = 2;
    cfg.t_max = 200;
    cfg.solver = solver;
    const SolveReport r = lrtc_solve(t, m, cfg);
    CHECK(r.iterations <= 200);
    CHECK(*relative_error(t, r.recovered) < 1e-4);
  }
}

TEST_CASE("a dominating penalty prunes everything") {
  std::mt19937_64 rng(5);
  const DenseTensor t = random_cp_tensor(Shape{6, 6, 6}, 2, WeightsMode::Unit, 1);
  const ObservationMask m = sample_mask(t.shape(), 0.3, 2);
  for (LrtcSolver solver : {LrtcSolver::Bcde, LrtcSolver::QuasiNewton}) {
    for (const char* reg : {"sym:p=1/3", "sym:p=1/6"}) {
      LrtcConfig cfg;
      cfg.lambda = 1e6;
      cfg.spec = RegularizerSpec::parse(reg, 3);
      cfg.solver = solver;
      cfg.k_init = 4;
      const SolveReport r = lrtc_solve(t, m, cfg);
      CAPTURE(reg);
      CHECK(r.final_rank == 0);
      CHECK(r.recovered == DenseTensor::zeros(t.shape()));
    }
  }
}

TEST_CASE("a dominating ridge penalty shrinks toward zero") {
  const DenseTensor t = random_cp_tensor(Shape{6, 6, 6}, 2, WeightsMode::Unit, 1);
  LrtcConfig cfg;
  cfg.lambda = 1e6;
  cfg.spec = RegularizerSpec::symmetric(3, 2.0 / 3.0);
  cfg.k_init = 4;
  const SolveReport r = bcde_solve(t, ObservationMask::full(t.shape()), cfg);
  CHECK(r.recovered.frobenius_norm() < 1e-6 * t.frobenius_norm());
}

TEST_CASE("bcde without extrapolation never increases the objective") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LrtcData data = gen_lrtc_data(Shape{8, 7, 6}, 3, 0.1, 0.5, WeightsMode::Unit, seed);
    for (const char* reg : {"sym:p=1/3", "sym:p=2/3", "sym:p=1/6", "sym:p=1", "asym_a:q=1/2", "table2:s37"}) {
      LrtcConfig cfg;
      cfg.delta = 0.0;
      cfg.lambda = 0.5;
      cfg.spec = RegularizerSpec::parse(reg, 3);
      cfg.k_init = 5;
      cfg.t_max = 60;
      cfg.seed = seed;
      const SolveReport r = bcde_solve(data.observed, data.mask, cfg);
      CAPTURE(reg);
      CHECK(non_increasing(r.objective_trace, 0.0));
    }
  }
}

TEST_CASE("bcde with extrapolation still ends below its start") {
  const LrtcData data = gen_lrtc_data(Shape{8, 7, 6}, 3, 0.1, 0.5, WeightsMode::Unit, 3);
  LrtcConfig cfg;
  cfg.lambda = 0.3;
  cfg.k_init = 6;
  cfg.t_max = 80;
  const SolveReport r = bcde_solve(data.observed, data.mask, cfg);
  CHECK(non_increasing(r.objective_trace, 0.0));
  CHECK(r.objective_trace.back() < r.objective_trace.front());
}

TEST_CASE("quasi-newton trace is non-increasing up to pruning") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LrtcData data = gen_lrtc_data(Shape{8, 7, 6}, 3, 0.1, 0.5, WeightsMode::Unit, seed);
    for (double lambda : {0.0, 0.5, 5.0}) {
      LrtcConfig cfg;
      cfg.solver = LrtcSolver::QuasiNewton;
      cfg.lambda = lambda;
      cfg.k_init = 5;
      cfg.t_max = 80;
      cfg.seed = seed;
      const SolveReport r = quasi_newton_solve(data.observed, data.mask, cfg);
      for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
        const double rise = r.objective_trace[i] - r.objective_trace[i - 1];
        if (r.rank_trace[i] < r.rank_trace[i - 1]) {
          CHECK(rise < 1e-6);
        } else {
          CHECK(rise <= 0.0);
        }
      }
      CHECK(r.objective_trace.back() <= r.objective_trace.front());
    }
  }
}

TEST_CASE("pruning keeps factor sets consistent and traces aligned") {
  const LrtcData data = gen_lrtc_data(Shape{10, 9, 8}, 2, 0.1, 0.3, WeightsMode::Unit, 4);
  for (LrtcSolver solver : {LrtcSolver::Bcde, LrtcSolver::QuasiNewton}) {
    LrtcConfig cfg;
    cfg.solver = solver;
    cfg.lambda = 3.0;
    cfg.k_init = 8;
    cfg.t_max = 150;
    const SolveReport r = lrtc_solve(data.observed, data.mask, cfg);
    CHECK(r.factors.rank() == r.final_rank);
    for (std::size_t j = 0; j < 3; ++j) CHECK(static_cast<std::size_t>(r.factors[j].cols()) == r.final_rank);
    CHECK(r.objective_trace.size() == static_cast<std::size_t>(r.iterations) + 1);
    CHECK(r.rank_trace.size() == r.objective_trace.size());
    CHECK(r.time_trace.size() == r.objective_trace.size());
    for (std::size_t i = 1; i < r.rank_trace.size(); ++i) CHECK(r.rank_trace[i] <= r.rank_trace[i - 1]);
    CHECK(r.final_rank < 8);
    CHECK((cp_reconstruct(r.factors) == r.recovered));
  }
}

TEST_CASE("solves are deterministic") {
  const LrtcData data = gen_lrtc_data(Shape{8, 7, 6}, 3, 0.1, 0.5, WeightsMode::Unit, 11);
  for (LrtcSolver solver : {LrtcSolver::Bcde, LrtcSolver::QuasiNewton}) {
    LrtcConfig cfg;
    cfg.solver = solver;
    cfg.lambda = 0.4;
    cfg.k_init = 5;
    cfg.t_max = 50;
    const SolveReport a = lrtc_solve(data.observed, data.mask, cfg);
    const SolveReport b = lrtc_solve(data.observed, data.mask, cfg);
    CHECK(a.recovered == b.recovered);
    CHECK(a.objective_trace == b.objective_trace);
    CHECK(a.rank_trace == b.rank_trace);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("invalid inputs") {
  const DenseTensor t = DenseTensor::zeros(Shape{3, 3, 3});
  LrtcConfig cfg;
  CHECK_THROWS_AS(bcde_solve(t, ObservationMask(t.shape(), {}), cfg), std::invalid_argument);
  CHECK_THROWS_AS(quasi_newton_solve(t, ObservationMask(t.shape(), {}), cfg), std::invalid_argument);
  cfg.rho = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LrtcConfig{};
  cfg.delta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LrtcConfig{};
  cfg.spec = RegularizerSpec::symmetric(4, 0.5);
  CHECK_THROWS_AS(bcde_solve(t, ObservationMask::full(t.shape()), cfg), std::invalid_argument);
}

TEST_CASE("trace csv") {
  SolveReport r;
  r.objective_trace = {2.5, 1.25};
  r.rank_trace = {3, 2};
  r.time_trace = {0.0, 0.5};
  std::ostringstream out;
  write_trace_csv(out, r);
  CHECK(out.str() == "iter,objective,rank,seconds\n0,2.5,3,0\n1,1.25,2,0.5\n");
}

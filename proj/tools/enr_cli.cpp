// enr: generate synthetic problems, run the completion / robust PCA solvers,
// sweep lambda grids and score estimates.
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "enr/harness.hpp"
#include "enr/lrtc.hpp"
#include "enr/regularizers.hpp"
#include "enr/tensor_io.hpp"
#include "enr/trpca.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kNumeric = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_trace_file(const std::string& path, const enr::SolveReport& rep) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open " + path);
  enr::write_trace_csv(out, rep);
}

void require_finite(const enr::DenseTensor& t, const char* what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw enr::NumericError(std::string(what) + " has non-finite entries");
  }
}

struct GenArgs {
  std::string task = "lrtc";
  std::string shape = "30x30x30";
  std::size_t rank = 5;
  double noise = 0.1;
  double rate = -1.0;
  std::string weights;
  std::string corruption = "additive";
  std::uint64_t seed = 0;
  std::string prefix;
};

int run_gen(const GenArgs& a) {
  const enr::Shape shape = enr::parse_shape(a.shape);
  const bool trpca = a.task == "trpca";
  if (!trpca && a.task != "lrtc") throw UsageError("--task must be lrtc or trpca");
  std::string weights = a.weights.empty() ? (trpca ? "linear" : "unit") : a.weights;
  if (weights != "unit" && weights != "linear") throw UsageError("--weights must be unit or linear");
  const auto wm = weights == "linear" ? enr::WeightsMode::Linear : enr::WeightsMode::Unit;
  if (trpca) {
    if (a.corruption != "additive" && a.corruption != "replace") {
      throw UsageError("--corruption must be additive or replace");
    }
    const double density = a.rate < 0.0 ? 0.1 : a.rate;
    const auto corr = a.corruption == "replace" ? enr::Corruption::Replace : enr::Corruption::Additive;
    const enr::TrpcaData data = enr::gen_trpca_data(shape, a.rank, a.noise, density, wm, corr, a.seed);
    enr::write_tensor(a.prefix + "_truth.tnsr", data.truth);
    enr::write_tensor(a.prefix + "_data.tnsr", data.corrupted);
    enr::write_tensor(a.prefix + "_sparse.tnsr", data.sparse);
  } else {
    const double missing = a.rate < 0.0 ? 0.5 : a.rate;
    const enr::LrtcData data = enr::gen_lrtc_data(shape, a.rank, a.noise, missing, wm, a.seed);
    enr::write_tensor(a.prefix + "_truth.tnsr", data.truth);
    enr::write_tensor(a.prefix + "_data.tnsr", data.observed);
    enr::write_mask(a.prefix + "_mask.mask", data.mask);
  }
  return 0;
}

struct LrtcArgs {
  std::string data, mask, out, trace;
  std::size_t k = 10;
  double lambda = 0.0;
  std::string reg;
  std::string solver = "bcde";
  double rho = 1.0;
  double delta = 0.95;
  int tmax = 500;
  std::uint64_t seed = 0;
};

int run_lrtc(const LrtcArgs& a) {
  const enr::DenseTensor d = enr::read_tensor(a.data);
  const enr::ObservationMask m = a.mask.empty() ? enr::ObservationMask::full(d.shape()) : enr::read_mask(a.mask);
  if (!(m.shape() == d.shape())) throw UsageError("mask shape differs from data shape");
  const std::size_t order = d.shape().order();
  enr::LrtcConfig cfg;
  cfg.k_init = a.k;
  cfg.lambda = a.lambda;
  cfg.spec = a.reg.empty() ? enr::RegularizerSpec::symmetric(order, 1.0 / static_cast<double>(order))
                           : enr::RegularizerSpec::parse(a.reg, order);
  if (a.solver == "bcde") {
    cfg.solver = enr::LrtcSolver::Bcde;
  } else if (a.solver == "lbfgs" || a.solver == "qn") {
    cfg.solver = enr::LrtcSolver::QuasiNewton;
  } else {
    throw UsageError("--solver must be bcde or lbfgs");
  }
  cfg.rho = a.rho;
  cfg.delta = a.delta;
  cfg.t_max = a.tmax;
  cfg.seed = a.seed;
  const enr::SolveReport rep = enr::lrtc_solve(d, m, cfg);
  require_finite(rep.recovered, "recovered tensor");
  enr::write_tensor(a.out, rep.recovered);
  write_trace_file(a.trace.empty() ? a.out + ".trace.csv" : a.trace, rep);
  std::cout << "final_rank=" << rep.final_rank << " iterations=" << rep.iterations
            << " objective=" << rep.objective_trace.back() << '\n';
  return 0;
}

struct TrpcaArgs {
  std::string data, out, sparse_out, trace;
  std::size_t k = 10;
  double lambda_x = 0.0;
  double lambda_e = 1.0;
  double mu = 10.0;
  std::string reg;
  double q = 0.5;
  int tmax = 500;
  std::uint64_t seed = 0;
  double sparse_tol = 0.0;
};

int run_trpca(const TrpcaArgs& a) {
  const enr::DenseTensor d = enr::read_tensor(a.data);
  const std::size_t order = d.shape().order();
  enr::TrpcaConfig cfg;
  cfg.k_init = a.k;
  cfg.lambda_x = a.lambda_x;
  cfg.lambda_e = a.lambda_e;
  cfg.mu = a.mu;
  cfg.q = a.q;
  cfg.spec = a.reg.empty() ? enr::RegularizerSpec::symmetric(order, 1.0 / static_cast<double>(order))
                           : enr::RegularizerSpec::parse(a.reg, order);
  cfg.t_max = a.tmax;
  cfg.seed = a.seed;
  const enr::TrpcaResult res = enr::trpca_solve(d, cfg);
  require_finite(res.report.recovered, "recovered tensor");
  enr::write_tensor(a.out, res.report.recovered);
  enr::write_tensor(a.sparse_out.empty() ? a.out + ".sparse.tnsr" : a.sparse_out, res.sparse);
  write_trace_file(a.trace.empty() ? a.out + ".trace.csv" : a.trace, res.report);
  const enr::SparsitySummary s = enr::sparsity_summary(res.sparse, a.sparse_tol);
  std::cout << "nnz_above_tol,fraction\n" << s.nnz << ',' << s.fraction << '\n';
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string out;
};

int run_sweep(const SweepArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw UsageError("cannot open " + a.config);
  const enr::ExperimentSpec spec = enr::parse_experiment_config(in);
  const auto results = enr::run_experiment(spec);
  if (a.out.empty()) {
    enr::write_experiment_csv(std::cout, spec, results);
  } else {
    std::ofstream out(a.out);
    if (!out) throw UsageError("cannot open " + a.out);
    enr::write_experiment_csv(out, spec, results);
  }
  return 0;
}

struct EvalArgs {
  std::string truth, estimate, mask;
  double peak = 1.0;
};

int run_eval(const EvalArgs& a) {
  const enr::DenseTensor truth = enr::read_tensor(a.truth);
  const enr::DenseTensor est = enr::read_tensor(a.estimate);
  if (!(truth.shape() == est.shape())) throw UsageError("truth and estimate shapes differ");
  std::optional<enr::ObservationMask> unobserved;
  if (!a.mask.empty()) {
    const enr::ObservationMask m = enr::read_mask(a.mask);
    if (!(m.shape() == truth.shape())) throw UsageError("mask shape differs from truth shape");
    unobserved = m.complement();
  }
  const auto err = enr::relative_error(truth, est, unobserved ? &*unobserved : nullptr);
  if (!err) throw enr::NumericError("relative error undefined: truth is zero on the evaluated entries");
  std::cout << "rel_error,psnr\n" << *err << ',' << enr::psnr(truth, est, a.peak) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Euclidean-norm regularized tensor completion and robust PCA"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "write a synthetic problem as TNSR1/MASK files");
  g->add_option("--task", gen.task, "lrtc or trpca")->capture_default_str();
  g->add_option("--shape", gen.shape, "dims joined by x")->capture_default_str();
  g->add_option("--rank", gen.rank)->capture_default_str();
  g->add_option("--noise", gen.noise, "dense noise std relative to the truth's entry std")->capture_default_str();
  g->add_option("--missing-rate,--density", gen.rate, "missing rate (lrtc, default 0.5) or density (trpca, default 0.1)");
  g->add_option("--weights", gen.weights, "unit or linear");
  g->add_option("--corruption", gen.corruption, "additive or replace")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.prefix, "output prefix")->required();

  LrtcArgs lr;
  auto* l = app.add_subcommand("lrtc", "complete a tensor from observed entries");
  l->add_option("--data", lr.data)->required();
  l->add_option("--mask", lr.mask, "MASK file; all entries observed when omitted");
  l->add_option("--k", lr.k)->capture_default_str();
  l->add_option("--lambda", lr.lambda)->capture_default_str();
  l->add_option("--reg", lr.reg, "sym:p=1/3, asym_a:q=1/2, asym_b:q=1/2, table2:s12|s25|s37");
  l->add_option("--solver", lr.solver, "bcde or lbfgs")->capture_default_str();
  l->add_option("--rho", lr.rho)->capture_default_str();
  l->add_option("--delta", lr.delta)->capture_default_str();
  l->add_option("--tmax", lr.tmax)->capture_default_str();
  l->add_option("--seed", lr.seed)->capture_default_str();
  l->add_option("--out", lr.out, "recovered tensor (TNSR1)")->required();
  l->add_option("--trace", lr.trace, "trace CSV, default <out>.trace.csv");

  TrpcaArgs tr;
  auto* t = app.add_subcommand("trpca", "split a tensor into low-rank and sparse parts");
  t->add_option("--data", tr.data)->required();
  t->add_option("--k", tr.k)->capture_default_str();
  t->add_option("--lambda-x", tr.lambda_x)->capture_default_str();
  t->add_option("--lambda-e", tr.lambda_e, "use inf to force a zero sparse part")->capture_default_str();
  t->add_option("--mu", tr.mu)->capture_default_str();
  t->add_option("--reg", tr.reg);
  t->add_option("--q", tr.q)->capture_default_str();
  t->add_option("--tmax", tr.tmax)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--sparse-tol", tr.sparse_tol)->capture_default_str();
  t->add_option("--out", tr.out, "low-rank part (TNSR1)")->required();
  t->add_option("--sparse-out", tr.sparse_out, "sparse part, default <out>.sparse.tnsr");
  t->add_option("--trace", tr.trace, "trace CSV, default <out>.trace.csv");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "run a seeded lambda sweep from a key=value config");
  s->add_option("--config", sw.config)->required();
  s->add_option("--out", sw.out, "CSV path, stdout when omitted");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "relative error and PSNR of an estimate");
  e->add_option("--truth", ev.truth)->required();
  e->add_option("--estimate", ev.estimate)->required();
  e->add_option("--mask", ev.mask, "observation mask; scores the unobserved entries only");
  e->add_option("--peak", ev.peak)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*l) return run_lrtc(lr);
    if (*t) return run_trpca(tr);
    if (*s) return run_sweep(sw);
    if (*e) return run_eval(ev);
  } catch (const enr::NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << '\n';
    return kNumeric;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

#include "enr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "enr/simd/kernels.hpp"

namespace enr {

namespace {

// Independent streams per purpose, all derived from the one user seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

constexpr std::uint64_t kFactorStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kMaskStream = 3;
constexpr std::uint64_t kSparsePosStream = 4;
constexpr std::uint64_t kSparseValStream = 5;

void add_noise(DenseTensor& t, double std_dev, std::uint64_t seed) {
  if (std_dev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std_dev);
  for (double& v : t.data()) v += normal(rng);
}

}  // namespace

DenseTensor random_cp_tensor(const Shape& shape, std::size_t rank, WeightsMode weights, std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("random_cp_tensor: rank must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Matrix> factors;
  for (std::size_t n : shape.dims()) {
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rank));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = normal(rng);
    }
    factors.push_back(std::move(x));
  }
  if (weights == WeightsMode::Linear) {
    for (std::size_t i = 0; i < rank; ++i) {
      factors[0].col(static_cast<Eigen::Index>(i)) *= static_cast<double>(i + 1) / static_cast<double>(rank);
    }
  }
  return cp_reconstruct(FactorSet(std::move(factors)));
}

double entry_std(const DenseTensor& t) {
  const double n = static_cast<double>(t.size());
  if (n == 0.0) return 0.0;
  double mean = 0.0;
  for (double v : t.data()) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : t.data()) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

LrtcData gen_lrtc_data(const Shape& shape, std::size_t rank, double noise_level, double missing_rate,
                       WeightsMode weights, std::uint64_t seed) {
  if (!(noise_level >= 0.0)) throw std::invalid_argument("gen_lrtc_data: negative noise level");
  LrtcData out;
  out.truth = random_cp_tensor(shape, rank, weights, stream_seed(seed, kFactorStream));
  out.observed = out.truth;
  add_noise(out.observed, noise_level * entry_std(out.truth), stream_seed(seed, kNoiseStream));
  out.mask = sample_mask(shape, missing_rate, stream_seed(seed, kMaskStream));
  return out;
}

TrpcaData gen_trpca_data(const Shape& shape, std::size_t rank, double noise_level, double density,
                         WeightsMode weights, Corruption corruption, std::uint64_t seed) {
  if (!(noise_level >= 0.0)) throw std::invalid_argument("gen_trpca_data: negative noise level");
  if (!(density >= 0.0 && density < 1.0)) throw std::invalid_argument("gen_trpca_data: density must lie in [0, 1)");
  TrpcaData out;
  out.truth = random_cp_tensor(shape, rank, weights, stream_seed(seed, kFactorStream));
  const double sigma = entry_std(out.truth);
  DenseTensor noisy = out.truth;
  add_noise(noisy, noise_level * sigma, stream_seed(seed, kNoiseStream));
  out.corrupted = noisy;
  out.sparse = DenseTensor::zeros(shape);
  const ObservationMask positions = density == 0.0 ? ObservationMask(shape, {})
                                                   : sample_mask(shape, 1.0 - density, stream_seed(seed, kSparsePosStream));
  std::mt19937_64 rng(stream_seed(seed, kSparseValStream));
  std::normal_distribution<double> normal(0.0, sigma);
  for (std::uint64_t off : positions.offsets()) {
    const double draw = normal(rng);
    if (corruption == Corruption::Additive) {
      out.corrupted[off] += draw;
    } else {
      out.corrupted[off] = draw;
    }
    out.sparse[off] = out.corrupted[off] - noisy[off];
  }
  return out;
}

std::optional<double> relative_error(const DenseTensor& truth, const DenseTensor& estimate,
                                     const ObservationMask* eval) {
  if (!(truth.shape() == estimate.shape())) throw std::invalid_argument("relative_error: shape mismatch");
  if (eval != nullptr && !(eval->shape() == truth.shape())) {
    throw std::invalid_argument("relative_error: mask shape mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  auto add = [&](std::size_t i) {
    const double diff = truth[i] - estimate[i];
    num += diff * diff;
    den += truth[i] * truth[i];
  };
  if (eval == nullptr) {
    for (std::size_t i = 0; i < truth.size(); ++i) add(i);
  } else {
    for (std::uint64_t off : eval->offsets()) add(static_cast<std::size_t>(off));
  }
  if (den == 0.0) return std::nullopt;
  return std::sqrt(num / den);
}

double psnr(const DenseTensor& truth, const DenseTensor& estimate, double peak) {
  if (!(truth.shape() == estimate.shape())) throw std::invalid_argument("psnr: shape mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double diff = truth[i] - estimate[i];
    ss += diff * diff;
  }
  const double mse = ss / static_cast<double>(truth.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo)) throw std::invalid_argument("log_grid: need 0 < lo <= hi");
  if (n == 0) throw std::invalid_argument("log_grid: need at least one point");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

// ---------------------------------------------------------------- experiments

void ExperimentSpec::validate() const {
  if (true_rank < 1) throw std::invalid_argument("experiment: rank must be at least 1");
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("experiment: rate must lie in [0, 1)");
  if (!(noise_level >= 0.0)) throw std::invalid_argument("experiment: negative noise level");
  if (seeds.empty()) throw std::invalid_argument("experiment: no seeds");
  if (reg().order() != shape.order()) throw std::invalid_argument("experiment: regularizer order differs from shape");
  for (double l : lambdas) {
    if (!(l >= 0.0) || std::isinf(l)) throw std::invalid_argument("experiment: lambda must be finite and nonnegative");
  }
  if (lambdas.empty()) (void)log_grid(lambda_min, lambda_max, lambda_points);
  if (task == Task::Lrtc) {
    lrtc.validate();
  } else {
    trpca.validate();
  }
}

std::vector<double> ExperimentSpec::grid() const {
  return lambdas.empty() ? log_grid(lambda_min, lambda_max, lambda_points) : lambdas;
}

namespace {

RunResult run_one(const ExperimentSpec& spec, const LrtcData* lrtc, const TrpcaData* trpca, std::uint64_t seed,
                  double lambda) {
  RunResult r;
  r.seed = seed;
  r.lambda = lambda;
  try {
    const SolveReport* rep = nullptr;
    SolveReport lrtc_rep;
    TrpcaResult trpca_res;
    if (spec.task == Task::Lrtc) {
      LrtcConfig cfg = spec.lrtc;
      cfg.lambda = lambda;
      cfg.seed = seed;
      lrtc_rep = lrtc_solve(lrtc->observed, lrtc->mask, cfg);
      rep = &lrtc_rep;
      const ObservationMask unobserved = lrtc->mask.complement();
      r.rel_error = relative_error(lrtc->truth, rep->recovered, unobserved.empty() ? nullptr : &unobserved);
      r.psnr = psnr(lrtc->truth, rep->recovered);
    } else {
      TrpcaConfig cfg = spec.trpca;
      cfg.lambda_x = lambda;
      cfg.seed = seed;
      trpca_res = trpca_solve(trpca->corrupted, cfg);
      rep = &trpca_res.report;
      r.rel_error = relative_error(trpca->truth, rep->recovered);
      r.psnr = psnr(trpca->truth, rep->recovered);
    }
    if (!r.rel_error) r.error = "zero reference norm";
    r.final_rank = rep->final_rank;
    r.iterations = rep->iterations;
    r.seconds = spec.record_time ? rep->wall_time : 0.0;
  } catch (const std::exception& ex) {
    r.error = ex.what();
  }
  return r;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> lambdas = spec.grid();
  const std::size_t ns = spec.seeds.size();

  std::vector<LrtcData> lrtc(spec.task == Task::Lrtc ? ns : 0);
  std::vector<TrpcaData> trpca(spec.task == Task::Trpca ? ns : 0);
  parallel_for(ns, spec.threads, [&](std::size_t s) {
    if (spec.task == Task::Lrtc) {
      lrtc[s] = gen_lrtc_data(spec.shape, spec.true_rank, spec.noise_level, spec.rate, spec.weights, spec.seeds[s]);
    } else {
      trpca[s] = gen_trpca_data(spec.shape, spec.true_rank, spec.noise_level, spec.rate, spec.weights,
                                spec.corruption, spec.seeds[s]);
    }
  });

  std::vector<RunResult> results(lambdas.size() * ns);
  parallel_for(results.size(), spec.threads, [&](std::size_t i) {
    const std::size_t li = i / ns;
    const std::size_t s = i % ns;
    results[i] = run_one(spec, spec.task == Task::Lrtc ? &lrtc[s] : nullptr,
                         spec.task == Task::Trpca ? &trpca[s] : nullptr, spec.seeds[s], lambdas[li]);
  });
  return results;
}

std::vector<LambdaSummary> summarize(const std::vector<RunResult>& results) {
  std::vector<LambdaSummary> out;
  for (std::size_t i = 0; i < results.size();) {
    std::size_t j = i;
    while (j < results.size() && results[j].lambda == results[i].lambda) ++j;
    LambdaSummary s;
    s.lambda = results[i].lambda;
    for (std::size_t t = i; t < j; ++t) {
      const RunResult& r = results[t];
      if (!r.error.empty() || !r.rel_error) continue;
      ++s.runs;
      s.mean_error += *r.rel_error;
      s.mean_psnr += r.psnr;
      s.mean_rank += static_cast<double>(r.final_rank);
      s.mean_iterations += r.iterations;
      s.mean_seconds += r.seconds;
    }
    if (s.runs > 0) {
      const double n = static_cast<double>(s.runs);
      s.mean_error /= n;
      s.mean_psnr /= n;
      s.mean_rank /= n;
      s.mean_iterations /= n;
      s.mean_seconds /= n;
      double ss = 0.0;
      for (std::size_t t = i; t < j; ++t) {
        const RunResult& r = results[t];
        if (r.error.empty() && r.rel_error) ss += (*r.rel_error - s.mean_error) * (*r.rel_error - s.mean_error);
      }
      s.std_error = s.runs > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    out.push_back(s);
    i = j;
  }
  return out;
}

std::optional<LambdaSummary> best_lambda(const std::vector<RunResult>& results) {
  std::optional<LambdaSummary> best;
  for (const LambdaSummary& s : summarize(results)) {
    if (s.runs == 0) continue;
    if (!best || s.mean_error < best->mean_error) best = s;
  }
  return best;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_experiment_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<RunResult>& results) {
  const std::string task = spec.task == Task::Lrtc ? "lrtc" : "trpca";
  const std::string p = num(spec.reg().p());
  const std::string rate = num(spec.rate);
  out << "task,seed,lambda,p_effective,missing_rate_or_density,rel_error,psnr,final_rank,iters,seconds,"
         "rel_error_std,error\n";
  const std::vector<LambdaSummary> summaries = summarize(results);
  std::size_t i = 0;
  for (const LambdaSummary& s : summaries) {
    for (; i < results.size() && results[i].lambda == s.lambda; ++i) {
      const RunResult& r = results[i];
      const bool ok = r.error.empty();
      out << task << ',' << r.seed << ',' << num(r.lambda) << ',' << p << ',' << rate << ','
          << (r.rel_error ? num(*r.rel_error) : "") << ',' << (ok ? num(r.psnr) : "") << ','
          << (ok ? std::to_string(r.final_rank) : "") << ',' << (ok ? std::to_string(r.iterations) : "") << ','
          << (ok ? num(r.seconds) : "") << ",," << csv_field(r.error) << '\n';
    }
    const bool any = s.runs > 0;
    out << task << ",summary," << num(s.lambda) << ',' << p << ',' << rate << ','
        << (any ? num(s.mean_error) : "") << ',' << (any ? num(s.mean_psnr) : "") << ','
        << (any ? num(s.mean_rank) : "") << ',' << (any ? num(s.mean_iterations) : "") << ','
        << (any ? num(s.mean_seconds) : "") << ',' << (any ? num(s.std_error) : "") << ','
        << (any ? "" : "no successful runs") << '\n';
  }
}

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

// "0,1,2" or "0..9".
std::vector<std::uint64_t> parse_seeds(const std::string& v) {
  const auto dots = v.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = to_uint("seeds", trim(v.substr(0, dots)));
    const std::uint64_t hi = to_uint("seeds", trim(v.substr(dots + 2)));
    if (hi < lo) throw std::invalid_argument("config: empty seed range");
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::vector<std::uint64_t> out;
  for (const std::string& p : split(v, ',')) out.push_back(to_uint("seeds", p));
  return out;
}

}  // namespace

Shape parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  for (const std::string& p : split(text, 'x')) dims.push_back(static_cast<std::size_t>(to_uint("shape", p)));
  return Shape(std::move(dims));
}

ExperimentSpec parse_experiment_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  ExperimentSpec spec;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("task")) {
    if (*v == "lrtc") {
      spec.task = Task::Lrtc;
    } else if (*v == "trpca") {
      spec.task = Task::Trpca;
      spec.weights = WeightsMode::Linear;
    } else {
      throw std::invalid_argument("config: task must be lrtc or trpca");
    }
  }
  if (auto v = take("shape")) spec.shape = parse_shape(*v);
  const std::size_t order = spec.shape.order();
  spec.lrtc.spec = RegularizerSpec::symmetric(order, 1.0 / static_cast<double>(order));
  spec.trpca.spec = spec.lrtc.spec;

  if (auto v = take("rank")) spec.true_rank = static_cast<std::size_t>(to_uint("rank", *v));
  if (auto v = take("noise")) spec.noise_level = to_real("noise", *v);
  if (auto v = take("missing_rate")) spec.rate = to_real("missing_rate", *v);
  if (auto v = take("density")) spec.rate = to_real("density", *v);
  if (auto v = take("weights")) {
    if (*v == "unit") {
      spec.weights = WeightsMode::Unit;
    } else if (*v == "linear") {
      spec.weights = WeightsMode::Linear;
    } else {
      throw std::invalid_argument("config: weights must be unit or linear");
    }
  }
  if (auto v = take("corruption")) {
    if (*v == "additive") {
      spec.corruption = Corruption::Additive;
    } else if (*v == "replace") {
      spec.corruption = Corruption::Replace;
    } else {
      throw std::invalid_argument("config: corruption must be additive or replace");
    }
  }
  if (auto v = take("reg")) {
    spec.lrtc.spec = RegularizerSpec::parse(*v, order);
    spec.trpca.spec = spec.lrtc.spec;
  }
  if (auto v = take("k")) {
    spec.lrtc.k_init = spec.trpca.k_init = static_cast<std::size_t>(to_uint("k", *v));
  }
  if (auto v = take("tmax")) {
    spec.lrtc.t_max = spec.trpca.t_max = static_cast<int>(to_uint("tmax", *v));
  }
  if (auto v = take("conv_tol")) spec.lrtc.conv_tol = spec.trpca.conv_tol = to_real("conv_tol", *v);
  if (auto v = take("solver")) {
    if (*v == "bcde") {
      spec.lrtc.solver = LrtcSolver::Bcde;
    } else if (*v == "lbfgs" || *v == "qn") {
      spec.lrtc.solver = LrtcSolver::QuasiNewton;
    } else {
      throw std::invalid_argument("config: solver must be bcde or lbfgs");
    }
  }
  if (auto v = take("rho")) spec.lrtc.rho = to_real("rho", *v);
  if (auto v = take("delta")) spec.lrtc.delta = to_real("delta", *v);
  if (auto v = take("prune_tol")) spec.lrtc.prune_tol = to_real("prune_tol", *v);
  if (auto v = take("lambda_e")) spec.trpca.lambda_e = to_real("lambda_e", *v);
  if (auto v = take("mu")) spec.trpca.mu = to_real("mu", *v);
  if (auto v = take("q")) spec.trpca.q = to_real("q", *v);
  if (auto v = take("seeds")) spec.seeds = parse_seeds(*v);
  if (auto v = take("lambdas")) {
    spec.lambdas.clear();
    for (const std::string& p : split(*v, ',')) spec.lambdas.push_back(to_real("lambdas", p));
  }
  if (auto v = take("lambda_min")) spec.lambda_min = to_real("lambda_min", *v);
  if (auto v = take("lambda_max")) spec.lambda_max = to_real("lambda_max", *v);
  if (auto v = take("lambda_points")) spec.lambda_points = static_cast<std::size_t>(to_uint("lambda_points", *v));
  if (auto v = take("record_time")) spec.record_time = to_bool("record_time", *v);
  if (auto v = take("threads")) spec.threads = static_cast<std::size_t>(to_uint("threads", *v));

  if (!kv.empty()) throw std::invalid_argument("config: unknown key '" + kv.begin()->first + "'");
  spec.validate();
  return spec;
}

}  // namespace enr

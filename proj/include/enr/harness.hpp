#pragma once

// Synthetic problem generators, recovery metrics and a seeded sweep runner
// that writes one CSV row per (lambda, seed) run.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "enr/lrtc.hpp"
#include "enr/tensor.hpp"
#include "enr/trpca.hpp"

namespace enr {

enum class Task { Lrtc, Trpca };
enum class WeightsMode { Unit, Linear };  // Linear: w_i = i / r
enum class Corruption { Additive, Replace };

struct LrtcData {
  DenseTensor truth;
  DenseTensor observed;
  ObservationMask mask;
};

struct TrpcaData {
  DenseTensor truth;
  DenseTensor corrupted;
  /// Exactly corrupted - truth - dense noise, for either corruption model.
  DenseTensor sparse;
};

/// sum_i w_i a_i o b_i o ... with standard normal vectors.
DenseTensor random_cp_tensor(const Shape& shape, std::size_t rank, WeightsMode weights, std::uint64_t seed);

/// Population standard deviation of the entries.
double entry_std(const DenseTensor& t);

/// Truth plus Gaussian noise of std noise_level * entry_std(truth); mask drawn by sample_mask.
LrtcData gen_lrtc_data(const Shape& shape, std::size_t rank, double noise_level, double missing_rate,
                       WeightsMode weights, std::uint64_t seed);

/// Truth plus Gaussian noise of std noise_level * sigma plus round(density * N)
/// corrupted entries of std sigma, sigma = entry_std(truth). Additive adds the
/// draws; Replace overwrites those entries with the draws.
TrpcaData gen_trpca_data(const Shape& shape, std::size_t rank, double noise_level, double density,
                         WeightsMode weights, Corruption corruption, std::uint64_t seed);

/// ||truth - estimate|| / ||truth|| over `eval` (all entries when null).
/// nullopt when the denominator is zero.
std::optional<double> relative_error(const DenseTensor& truth, const DenseTensor& estimate,
                                     const ObservationMask* eval = nullptr);

/// 10 log10(peak^2 / MSE); +inf when MSE is 0.
double psnr(const DenseTensor& truth, const DenseTensor& estimate, double peak = 1.0);

/// n points geometrically spaced from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct ExperimentSpec {
  Task task = Task::Lrtc;
  Shape shape{30, 30, 30};
  std::size_t true_rank = 5;
  double noise_level = 0.1;
  double rate = 0.5;  // missing rate for lrtc, sparse density for trpca
  WeightsMode weights = WeightsMode::Unit;
  Corruption corruption = Corruption::Additive;
  LrtcConfig lrtc{};    // lambda is overwritten per grid point, seed per run
  TrpcaConfig trpca{};  // lambda_x is overwritten per grid point, seed per run
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> lambdas;  // empty: log_grid(lambda_min, lambda_max, lambda_points)
  double lambda_min = 0.01;
  double lambda_max = 500.0;
  std::size_t lambda_points = 20;
  bool record_time = true;  // false writes 0 seconds so reruns are byte-identical
  std::size_t threads = 0;  // 0: hardware concurrency

  void validate() const;
  std::vector<double> grid() const;
  const RegularizerSpec& reg() const { return task == Task::Lrtc ? lrtc.spec : trpca.spec; }
};

struct RunResult {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::optional<double> rel_error;
  double psnr = 0.0;
  std::size_t final_rank = 0;
  int iterations = 0;
  double seconds = 0.0;
  std::string error;  // empty on success
};

/// Results ordered by grid point, then by seed, whatever order the runs finish in.
std::vector<RunResult> run_experiment(const ExperimentSpec& spec);

struct LambdaSummary {
  double lambda = 0.0;
  std::size_t runs = 0;  // successful runs
  double mean_error = 0.0;
  double std_error = 0.0;
  double mean_psnr = 0.0;
  double mean_rank = 0.0;
  double mean_iterations = 0.0;
  double mean_seconds = 0.0;
};

std::vector<LambdaSummary> summarize(const std::vector<RunResult>& results);

/// Grid point with the lowest mean error among those with at least one success.
std::optional<LambdaSummary> best_lambda(const std::vector<RunResult>& results);

/// Header plus, per grid point, one row per seed and a `summary` row.
void write_experiment_csv(std::ostream& out, const ExperimentSpec& spec, const std::vector<RunResult>& results);

/// Flat `key=value` lines; `#` starts a comment. Unknown keys throw std::invalid_argument.
ExperimentSpec parse_experiment_config(std::istream& in);

Shape parse_shape(const std::string& text);

}  // namespace enr

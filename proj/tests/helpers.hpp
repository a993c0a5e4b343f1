#pragma once

// Shared fixtures and brute-force oracles for the test binaries.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "enr/regularizers.hpp"
#include "enr/tensor.hpp"

namespace testutil {

inline enr::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  enr::Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

inline enr::FactorSet random_factors(std::mt19937_64& rng, const std::vector<std::size_t>& dims, std::size_t k) {
  std::vector<enr::Matrix> f;
  for (std::size_t n : dims) f.push_back(random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
  return enr::FactorSet(std::move(f));
}

inline enr::DenseTensor random_tensor(std::mt19937_64& rng, const enr::Shape& shape) {
  std::normal_distribution<double> normal;
  std::vector<double> data(shape.numel());
  for (double& v : data) v = normal(rng);
  return enr::DenseTensor(shape, std::move(data));
}

// Straight from the definition: sum over components of the product of entries.
inline double cp_entry(const enr::FactorSet& f, const std::vector<std::size_t>& idx) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.rank(); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < f.order(); ++j) prod *= f[j](static_cast<Eigen::Index>(idx[j]), static_cast<Eigen::Index>(i));
    total += prod;
  }
  return total;
}

inline double rel_diff(const enr::Matrix& a, const enr::Matrix& b) {
  const double den = std::max(a.norm(), b.norm());
  return den == 0.0 ? 0.0 : (a - b).norm() / den;
}

// Golden-section search for a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - g * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + g * (b - a); fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Dense grid scan followed by golden-section refinement around the best
// cell; handles objectives that are not unimodal (kinks at zero).
inline double grid_min(const std::function<double(double)>& f, double lo, double hi, int cells = 4000) {
  double best = lo;
  double fbest = f(lo);
  const double h = (hi - lo) / cells;
  for (int i = 1; i <= cells; ++i) {
    const double x = lo + h * i;
    const double fx = f(x);
    if (fx < fbest) { fbest = fx; best = x; }
  }
  const double a = std::max(lo, best - h);
  const double b = std::min(hi, best + h);
  const double refined = golden_min(f, a, b);
  return f(refined) < fbest ? refined : best;
}

// Schatten-type target: sum over components of (prod of column norms)^p.
inline double component_power_sum(const enr::FactorSet& f, double p) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(f.rank()); ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < f.order(); ++j) prod *= f[j].col(i).norm();
    total += std::pow(prod, p);
  }
  return total;
}

// Every regularizer family at a few exponents.
inline std::vector<enr::RegularizerSpec> specs_for(std::size_t d) {
  using enr::RegularizerSpec;
  std::vector<RegularizerSpec> out;
  for (double p : {1.0 / d, 2.0 / d, 0.5, 1.0, 0.3}) out.push_back(RegularizerSpec::symmetric(d, p));
  for (double q : {1.0, 0.5, 1.0 / 3.0}) {
    out.push_back(RegularizerSpec::asymmetric_a(d, q));
    out.push_back(RegularizerSpec::asymmetric_b(d, q));
  }
  if (d == 3) {
    for (auto r : {enr::Table2Row::S12, enr::Table2Row::S25, enr::Table2Row::S37}) {
      out.push_back(RegularizerSpec::table2(r));
    }
  }
  return out;
}

}  // namespace testutil

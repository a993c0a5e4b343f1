#pragma once

// Dense tensors, CP factor sets, observation masks and the multilinear
// primitives built on them.
//
// Storage is first-index-fastest: index (i_1, ..., i_d) lives at offset
// i_1 + n_1 * i_2 + n_1 * n_2 * i_3 + ...  Mode indices in this API are
// zero-based (mode 0 is the first mode).

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace enr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a numerical routine cannot produce a meaningful value
/// (zero denominators, non-finite data).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<std::size_t> dims);
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

  std::size_t order() const { return dims_.size(); }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t numel() const { return numel_; }

  /// Product of all dims except `mode`: the column count of the mode unfolding.
  std::size_t numel_except(std::size_t mode) const;

  std::size_t offset(std::span<const std::size_t> index) const;
  void index_of(std::size_t offset, std::span<std::size_t> index) const;

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  std::vector<std::size_t> dims_;
  std::size_t numel_ = 0;
};

class DenseTensor {
 public:
  DenseTensor() = default;
  /// Throws std::invalid_argument on a length mismatch or a non-finite entry.
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor zeros(const Shape& shape);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double operator[](std::size_t offset) const { return data_[offset]; }
  double& operator[](std::size_t offset) { return data_[offset]; }
  double at(std::span<const std::size_t> index) const { return data_[shape_.offset(index)]; }
  double at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  double frobenius_norm() const;

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);
  DenseTensor& operator*=(double c);

  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(double c, DenseTensor a) { return a *= c; }
  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// d factor matrices X^(j) of size n_j x k sharing the column count k.
/// Column i across all modes forms the i-th rank-one component.
class FactorSet {
 public:
  FactorSet() = default;
  explicit FactorSet(std::vector<Matrix> factors);

  static FactorSet zeros(const Shape& shape, std::size_t rank);

  std::size_t order() const { return factors_.size(); }
  std::size_t rank() const { return factors_.empty() ? 0 : static_cast<std::size_t>(factors_[0].cols()); }
  Shape shape() const;

  const Matrix& operator[](std::size_t mode) const { return factors_[mode]; }
  const std::vector<Matrix>& factors() const { return factors_; }

  /// Replace one factor; the new matrix must keep the row and column count.
  void set(std::size_t mode, Matrix value);

  /// Euclidean norms of the columns of one factor.
  Vector column_norms(std::size_t mode) const;

  /// Keep only the components whose flag is true, in order.
  FactorSet select_components(const std::vector<bool>& keep) const;

 private:
  std::vector<Matrix> factors_;
};

/// Sorted, duplicate-free set of observed linear offsets.
class ObservationMask {
 public:
  ObservationMask() = default;
  /// Sorts the offsets; throws on duplicates or out-of-range offsets.
  ObservationMask(Shape shape, std::vector<std::uint64_t> offsets);

  static ObservationMask full(const Shape& shape);

  const Shape& shape() const { return shape_; }
  std::size_t count() const { return offsets_.size(); }
  bool empty() const { return offsets_.empty(); }
  std::span<const std::uint64_t> offsets() const { return offsets_; }
  bool contains(std::uint64_t offset) const;

  ObservationMask complement() const;

  /// Binary tensor: 1 at observed entries, 0 elsewhere.
  DenseTensor indicator() const;

  friend bool operator==(const ObservationMask& a, const ObservationMask& b) {
    return a.shape_ == b.shape_ && a.offsets_ == b.offsets_;
  }

 private:
  Shape shape_;
  std::vector<std::uint64_t> offsets_;
};

/// Mode-`mode` matricization, n_mode x prod_{i != mode} n_i, remaining modes
/// enumerated with the smallest mode varying fastest.
Matrix unfold(const DenseTensor& t, std::size_t mode);

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape);

/// Column-wise Kronecker product X^(d-1) (.) ... (.) X^(mode+1) (.) X^(mode-1) (.) ... (.) X^(0).
/// Satisfies unfold(cp_reconstruct(f), mode) == f[mode] * khatri_rao(f, mode)^T.
Matrix khatri_rao(const FactorSet& f, std::size_t skip);

/// Khatri-Rao product of an explicit list, last matrix outermost.
Matrix khatri_rao(std::span<const Matrix> mats);

/// Gram matrix of khatri_rao(f, skip), computed as the Hadamard product of
/// the factor Gram matrices without forming the product itself.
Matrix khatri_rao_gram(const FactorSet& f, std::size_t skip);

DenseTensor cp_reconstruct(const FactorSet& f);

/// unfold(t, mode) * khatri_rao(f, mode).
Matrix mttkrp(const DenseTensor& t, const FactorSet& f, std::size_t mode);

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value by power iteration on m^T m. The start vector is
/// drawn from `seed`. Stops once the Rayleigh residual of the Gram matrix is
/// below tol relative to the current eigenvalue estimate.
SpectralEstimate spectral_norm_est(const Matrix& m, double tol = 1e-6, int max_iters = 500,
                                   std::uint64_t seed = 0x5eed);

/// Same iteration applied directly to a symmetric positive semidefinite
/// matrix; returns its largest eigenvalue.
SpectralEstimate largest_eigenvalue_psd(const Matrix& gram, double tol = 1e-6,
                                        int max_iters = 500, std::uint64_t seed = 0x5eed);

struct MaskedResidual {
  DenseTensor residual;       // D - CP(f) on observed entries, zero elsewhere
  double squared_norm = 0.0;  // plain squared Frobenius norm, not halved
};

MaskedResidual masked_residual(const DenseTensor& d, const FactorSet& f, const ObservationMask& m);

/// Uniform sample without replacement of round((1 - missing_rate) * numel)
/// offsets. Deterministic per seed.
ObservationMask sample_mask(const Shape& shape, double missing_rate, std::uint64_t seed);

/// Coordinates of the observed entries, one row per entry, laid out for the
/// sparse kernels below.
class ObservedEntries {
 public:
  ObservedEntries(const DenseTensor& data, const ObservationMask& mask);

  std::size_t count() const { return values_.size(); }
  std::size_t order() const { return order_; }
  const Shape& shape() const { return shape_; }
  std::span<const std::uint32_t> index(std::size_t entry) const {
    return {coords_.data() + entry * order_, order_};
  }
  std::span<const double> values() const { return values_; }

  /// CP(f) evaluated at each observed entry.
  std::vector<double> cp_values(const FactorSet& f) const;

  /// values - CP(f) at each observed entry.
  std::vector<double> residuals(const FactorSet& f) const;

  /// sum_e weight[e] * (Hadamard product over modes != mode of the factor
  /// rows at entry e), scattered into row index_mode(e). This is the mode
  /// MTTKRP of the sparse tensor carrying `weights` on the observed entries.
  Matrix sparse_mttkrp(const FactorSet& f, std::span<const double> weights, std::size_t mode) const;

 private:
  Shape shape_;
  std::size_t order_ = 0;
  std::vector<std::uint32_t> coords_;
  std::vector<double> values_;
};

}  // namespace enr

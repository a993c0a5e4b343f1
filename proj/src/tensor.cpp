#include "enr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "enr/simd/kernels.hpp"

namespace enr {

// ---------------------------------------------------------------- Shape

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw std::invalid_argument("Shape: order must be at least 2");
  numel_ = 1;
  for (std::size_t n : dims_) {
    if (n == 0) throw std::invalid_argument("Shape: every dimension must be positive");
    if (n > std::numeric_limits<std::uint32_t>::max()) {
      throw std::invalid_argument("Shape: dimension exceeds 32-bit range");
    }
    if (numel_ > std::numeric_limits<std::size_t>::max() / n) {
      throw std::invalid_argument("Shape: element count overflows");
    }
    numel_ *= n;
  }
}

std::size_t Shape::numel_except(std::size_t mode) const { return numel_ / dims_.at(mode); }

std::size_t Shape::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) throw std::invalid_argument("Shape::offset: wrong index length");
  std::size_t off = 0;
  std::size_t stride = 1;
  for (std::size_t j = 0; j < dims_.size(); ++j) {
    if (index[j] >= dims_[j]) throw std::out_of_range("Shape::offset: index out of range");
    off += index[j] * stride;
    stride *= dims_[j];
  }
  return off;
}

void Shape::index_of(std::size_t offset, std::span<std::size_t> index) const {
  for (std::size_t j = 0; j < dims_.size(); ++j) {
    index[j] = offset % dims_[j];
    offset /= dims_[j];
  }
}

// ---------------------------------------------------------------- DenseTensor

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw std::invalid_argument("DenseTensor: data length " + std::to_string(data_.size()) +
                                " does not match shape (" + std::to_string(shape_.numel()) + ")");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError("DenseTensor: non-finite entry");
  }
}

DenseTensor DenseTensor::zeros(const Shape& shape) {
  return DenseTensor(shape, std::vector<double>(shape.numel(), 0.0));
}

double DenseTensor::frobenius_norm() const { return std::sqrt(simd::sum_squares(data_)); }

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (!(shape_ == other.shape_)) throw std::invalid_argument("DenseTensor: shape mismatch");
  simd::axpy(1.0, other.data_, data_);
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
  if (!(shape_ == other.shape_)) throw std::invalid_argument("DenseTensor: shape mismatch");
  simd::axpy(-1.0, other.data_, data_);
  return *this;
}

DenseTensor& DenseTensor::operator*=(double c) {
  simd::scale(c, data_);
  return *this;
}

// ---------------------------------------------------------------- FactorSet

FactorSet::FactorSet(std::vector<Matrix> factors) : factors_(std::move(factors)) {
  if (factors_.size() < 2) throw std::invalid_argument("FactorSet: need at least two factors");
  const auto k = factors_[0].cols();
  for (const Matrix& m : factors_) {
    if (m.cols() != k) throw std::invalid_argument("FactorSet: inconsistent column count across factors");
    if (m.rows() == 0) throw std::invalid_argument("FactorSet: empty factor");
    if (!m.allFinite()) throw NumericError("FactorSet: non-finite entry");
  }
}

FactorSet FactorSet::zeros(const Shape& shape, std::size_t rank) {
  std::vector<Matrix> f;
  f.reserve(shape.order());
  for (std::size_t n : shape.dims()) f.push_back(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rank)));
  return FactorSet(std::move(f));
}

Shape FactorSet::shape() const {
  std::vector<std::size_t> dims;
  dims.reserve(factors_.size());
  for (const Matrix& m : factors_) dims.push_back(static_cast<std::size_t>(m.rows()));
  return Shape(std::move(dims));
}

void FactorSet::set(std::size_t mode, Matrix value) {
  Matrix& slot = factors_.at(mode);
  if (value.rows() != slot.rows() || value.cols() != slot.cols()) {
    throw std::invalid_argument("FactorSet::set: dimension change");
  }
  slot = std::move(value);
}

Vector FactorSet::column_norms(std::size_t mode) const { return factors_.at(mode).colwise().norm().transpose(); }

FactorSet FactorSet::select_components(const std::vector<bool>& keep) const {
  if (keep.size() != rank()) throw std::invalid_argument("select_components: flag count != rank");
  std::vector<Eigen::Index> cols;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) cols.push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<Matrix> out;
  out.reserve(factors_.size());
  for (const Matrix& m : factors_) {
    Matrix s(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) s.col(static_cast<Eigen::Index>(c)) = m.col(cols[c]);
    out.push_back(std::move(s));
  }
  return FactorSet(std::move(out));
}

// ---------------------------------------------------------------- ObservationMask

ObservationMask::ObservationMask(Shape shape, std::vector<std::uint64_t> offsets)
    : shape_(std::move(shape)), offsets_(std::move(offsets)) {
  std::sort(offsets_.begin(), offsets_.end());
  if (std::adjacent_find(offsets_.begin(), offsets_.end()) != offsets_.end()) {
    throw std::invalid_argument("ObservationMask: duplicate offsets");
  }
  if (!offsets_.empty() && offsets_.back() >= shape_.numel()) {
    throw std::invalid_argument("ObservationMask: offset out of range");
  }
}

ObservationMask ObservationMask::full(const Shape& shape) {
  std::vector<std::uint64_t> all(shape.numel());
  std::iota(all.begin(), all.end(), std::uint64_t{0});
  return ObservationMask(shape, std::move(all));
}

bool ObservationMask::contains(std::uint64_t offset) const {
  return std::binary_search(offsets_.begin(), offsets_.end(), offset);
}

ObservationMask ObservationMask::complement() const {
  std::vector<std::uint64_t> rest;
  rest.reserve(shape_.numel() - offsets_.size());
  std::size_t next = 0;
  for (std::uint64_t o = 0; o < shape_.numel(); ++o) {
    if (next < offsets_.size() && offsets_[next] == o) {
      ++next;
    } else {
      rest.push_back(o);
    }
  }
  return ObservationMask(shape_, std::move(rest));
}

DenseTensor ObservationMask::indicator() const {
  DenseTensor t = DenseTensor::zeros(shape_);
  for (std::uint64_t o : offsets_) t[o] = 1.0;
  return t;
}

// ---------------------------------------------------------------- multilinear ops

namespace {

void check_mode(std::size_t mode, std::size_t order) {
  if (mode >= order) {
    throw std::out_of_range("mode " + std::to_string(mode) + " out of range for order " + std::to_string(order));
  }
}

// Products of dims below `mode` (stride of the mode) and above it.
std::pair<std::size_t, std::size_t> split_strides(const Shape& s, std::size_t mode) {
  std::size_t left = 1;
  for (std::size_t j = 0; j < mode; ++j) left *= s.dim(j);
  std::size_t right = 1;
  for (std::size_t j = mode + 1; j < s.order(); ++j) right *= s.dim(j);
  return {left, right};
}

}  // namespace

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  const Shape& s = t.shape();
  check_mode(mode, s.order());
  const auto [left, right] = split_strides(s, mode);
  const std::size_t n = s.dim(mode);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(left * right));
  for (std::size_t r = 0; r < right; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = left * (i + n * r);
      for (std::size_t l = 0; l < left; ++l) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * r)) = t[base + l];
      }
    }
  }
  return m;
}

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape) {
  check_mode(mode, shape.order());
  const auto [left, right] = split_strides(shape, mode);
  const std::size_t n = shape.dim(mode);
  if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != left * right) {
    throw std::invalid_argument("fold: matrix dimensions do not match shape and mode");
  }
  std::vector<double> data(shape.numel());
  for (std::size_t r = 0; r < right; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = left * (i + n * r);
      for (std::size_t l = 0; l < left; ++l) {
        data[base + l] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * r));
      }
    }
  }
  return DenseTensor(shape, std::move(data));
}

Matrix khatri_rao(std::span<const Matrix> mats) {
  if (mats.empty()) throw std::invalid_argument("khatri_rao: empty list");
  const Eigen::Index k = mats[0].cols();
  Matrix acc = mats[0];
  for (std::size_t m = 1; m < mats.size(); ++m) {
    const Matrix& next = mats[m];
    if (next.cols() != k) throw std::invalid_argument("khatri_rao: inconsistent column count");
    Matrix out(acc.rows() * next.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index r = 0; r < next.rows(); ++r) {
        out.col(c).segment(r * acc.rows(), acc.rows()) = next(r, c) * acc.col(c);
      }
    }
    acc = std::move(out);
  }
  return acc;
}

Matrix khatri_rao(const FactorSet& f, std::size_t skip) {
  check_mode(skip, f.order());
  std::vector<Matrix> rest;
  rest.reserve(f.order() - 1);
  for (std::size_t j = 0; j < f.order(); ++j) {
    if (j != skip) rest.push_back(f[j]);
  }
  return khatri_rao(std::span<const Matrix>(rest));
}

Matrix khatri_rao_gram(const FactorSet& f, std::size_t skip) {
  check_mode(skip, f.order());
  const auto k = static_cast<Eigen::Index>(f.rank());
  Matrix g = Matrix::Ones(k, k);
  for (std::size_t j = 0; j < f.order(); ++j) {
    if (j == skip) continue;
    g = g.cwiseProduct(f[j].transpose() * f[j]);
  }
  return g;
}

DenseTensor cp_reconstruct(const FactorSet& f) {
  const Shape s = f.shape();
  if (f.rank() == 0) return DenseTensor::zeros(s);
  // The mode-0 unfolding stored column-major is exactly first-index-fastest order.
  const Matrix m0 = f[0] * khatri_rao(f, 0).transpose();
  return DenseTensor(s, std::vector<double>(m0.data(), m0.data() + m0.size()));
}

Matrix mttkrp(const DenseTensor& t, const FactorSet& f, std::size_t mode) {
  if (!(t.shape() == f.shape())) throw std::invalid_argument("mttkrp: shape mismatch");
  return unfold(t, mode) * khatri_rao(f, mode);
}

SpectralEstimate largest_eigenvalue_psd(const Matrix& gram, double tol, int max_iters, std::uint64_t seed) {
  if (gram.rows() != gram.cols()) throw std::invalid_argument("largest_eigenvalue_psd: matrix not square");
  if (!gram.allFinite()) throw NumericError("largest_eigenvalue_psd: non-finite matrix");
  SpectralEstimate est;
  const Eigen::Index n = gram.rows();
  if (n == 0) {
    est.converged = true;
    return est;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  v.normalize();

  double theta = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    const Vector w = gram * v;
    theta = v.dot(w);
    est.iterations = it;
    const double wnorm = w.norm();
    if (wnorm == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    const double resid = (w - theta * v).norm();
    est.value = theta;
    if (resid <= tol * std::abs(theta)) {
      est.converged = true;
      return est;
    }
    v = w / wnorm;
  }
  return est;
}

SpectralEstimate spectral_norm_est(const Matrix& m, double tol, int max_iters, std::uint64_t seed) {
  const Matrix gram = m.transpose() * m;
  SpectralEstimate est = largest_eigenvalue_psd(gram, tol, max_iters, seed);
  est.value = std::sqrt(std::max(est.value, 0.0));
  return est;
}

MaskedResidual masked_residual(const DenseTensor& d, const FactorSet& f, const ObservationMask& m) {
  if (!(d.shape() == m.shape()) || !(d.shape() == f.shape())) {
    throw std::invalid_argument("masked_residual: shape mismatch");
  }
  const ObservedEntries obs(d, m);
  const std::vector<double> r = obs.residuals(f);
  MaskedResidual out{DenseTensor::zeros(d.shape()), simd::sum_squares(r)};
  const auto offsets = m.offsets();
  for (std::size_t e = 0; e < r.size(); ++e) out.residual[offsets[e]] = r[e];
  return out;
}

ObservationMask sample_mask(const Shape& shape, double missing_rate, std::uint64_t seed) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw std::invalid_argument("sample_mask: missing_rate must lie in [0, 1)");
  }
  const std::uint64_t total = shape.numel();
  const auto keep = static_cast<std::uint64_t>(std::llround((1.0 - missing_rate) * static_cast<double>(total)));

  // Partial Fisher-Yates over 0..total-1; only displaced slots are stored.
  std::mt19937_64 rng(seed);
  std::unordered_map<std::uint64_t, std::uint64_t> moved;
  moved.reserve(static_cast<std::size_t>(2 * keep));
  auto slot = [&](std::uint64_t i) {
    auto it = moved.find(i);
    return it == moved.end() ? i : it->second;
  };
  std::vector<std::uint64_t> picked;
  picked.reserve(static_cast<std::size_t>(keep));
  for (std::uint64_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::uint64_t> pick(i, total - 1);
    const std::uint64_t j = pick(rng);
    const std::uint64_t vi = slot(i);
    const std::uint64_t vj = slot(j);
    picked.push_back(vj);
    moved[j] = vi;
  }
  return ObservationMask(shape, std::move(picked));
}

// ---------------------------------------------------------------- ObservedEntries

ObservedEntries::ObservedEntries(const DenseTensor& data, const ObservationMask& mask)
    : shape_(data.shape()), order_(data.shape().order()) {
  if (!(mask.shape() == data.shape())) throw std::invalid_argument("ObservedEntries: shape mismatch");
  coords_.resize(mask.count() * order_);
  values_.resize(mask.count());
  std::vector<std::size_t> idx(order_);
  const auto offsets = mask.offsets();
  for (std::size_t e = 0; e < offsets.size(); ++e) {
    shape_.index_of(offsets[e], idx);
    for (std::size_t j = 0; j < order_; ++j) coords_[e * order_ + j] = static_cast<std::uint32_t>(idx[j]);
    values_[e] = data[offsets[e]];
  }
}

namespace {

std::vector<RowMatrix> row_major(const FactorSet& f) {
  std::vector<RowMatrix> rows;
  rows.reserve(f.order());
  for (const Matrix& m : f.factors()) rows.emplace_back(m);
  return rows;
}

}  // namespace

std::vector<double> ObservedEntries::cp_values(const FactorSet& f) const {
  if (!(f.shape() == shape_)) throw std::invalid_argument("cp_values: shape mismatch");
  const std::size_t k = f.rank();
  std::vector<double> out(count(), 0.0);
  if (k == 0) return out;
  const std::vector<RowMatrix> rows = row_major(f);
  const simd::KernelTable& kt = simd::active();
  std::vector<double> tmp(k);
  for (std::size_t e = 0; e < count(); ++e) {
    const std::uint32_t* idx = coords_.data() + e * order_;
    const double* first = rows[0].data() + static_cast<std::size_t>(idx[0]) * k;
    if (order_ == 2) {
      out[e] = kt.dot(first, rows[1].data() + static_cast<std::size_t>(idx[1]) * k, k);
      continue;
    }
    kt.hadamard(first, rows[1].data() + static_cast<std::size_t>(idx[1]) * k, tmp.data(), k);
    for (std::size_t j = 2; j + 1 < order_; ++j) {
      kt.hadamard(tmp.data(), rows[j].data() + static_cast<std::size_t>(idx[j]) * k, tmp.data(), k);
    }
    out[e] = kt.dot(tmp.data(), rows[order_ - 1].data() + static_cast<std::size_t>(idx[order_ - 1]) * k, k);
  }
  return out;
}

std::vector<double> ObservedEntries::residuals(const FactorSet& f) const {
  std::vector<double> r = cp_values(f);
  for (std::size_t e = 0; e < r.size(); ++e) r[e] = values_[e] - r[e];
  return r;
}

Matrix ObservedEntries::sparse_mttkrp(const FactorSet& f, std::span<const double> weights,
                                      std::size_t mode) const {
  check_mode(mode, order_);
  if (!(f.shape() == shape_)) throw std::invalid_argument("sparse_mttkrp: shape mismatch");
  if (weights.size() != count()) throw std::invalid_argument("sparse_mttkrp: weight count mismatch");
  const std::size_t k = f.rank();
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(shape_.dim(mode)), static_cast<Eigen::Index>(k));
  if (k == 0) return out;
  const std::vector<RowMatrix> rows = row_major(f);
  const simd::KernelTable& kt = simd::active();
  std::vector<double> tmp(k);
  for (std::size_t e = 0; e < count(); ++e) {
    if (weights[e] == 0.0) continue;
    const std::uint32_t* idx = coords_.data() + e * order_;
    bool first = true;
    for (std::size_t j = 0; j < order_; ++j) {
      if (j == mode) continue;
      const double* row = rows[j].data() + static_cast<std::size_t>(idx[j]) * k;
      if (first) {
        std::copy(row, row + k, tmp.begin());
        first = false;
      } else {
        kt.hadamard(tmp.data(), row, tmp.data(), k);
      }
    }
    kt.axpy(weights[e], tmp.data(), out.data() + static_cast<std::size_t>(idx[mode]) * k, k);
  }
  return out;
}

}  // namespace enr

#include "enr/tensor_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace enr {
namespace {

constexpr std::uint8_t kVersion = 1;
constexpr std::uint32_t kMaxOrder = 64;

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("unexpected end of file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_header(std::ostream& out, const char (&magic)[5], const Shape& s) {
  out.write(magic, 4);
  out.put(static_cast<char>(kVersion));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.order()));
  for (std::size_t n : s.dims()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
}

Shape get_header(std::istream& in, const char (&magic)[5]) {
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
  const int version = in.get();
  if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version));
  const auto order = get_le<std::uint32_t>(in);
  if (order < 2 || order > kMaxOrder) throw FormatError("invalid order " + std::to_string(order));
  std::vector<std::size_t> dims(order);
  for (auto& n : dims) n = get_le<std::uint32_t>(in);
  try {
    return Shape(std::move(dims));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

}  // namespace

void write_tensor(std::ostream& out, const DenseTensor& t) {
  put_header(out, "TNSR", t.shape());
  for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw std::runtime_error("write_tensor: stream failure");
}

DenseTensor read_tensor(std::istream& in) {
  const Shape shape = get_header(in, "TNSR");
  std::vector<double> data(shape.numel());
  for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  for (double v : data) {
    if (!std::isfinite(v)) throw FormatError("read_tensor: non-finite payload value");
  }
  return DenseTensor(shape, std::move(data));
}

void write_mask(std::ostream& out, const ObservationMask& m) {
  put_header(out, "MASK", m.shape());
  put_le<std::uint64_t>(out, m.count());
  for (std::uint64_t o : m.offsets()) put_le<std::uint64_t>(out, o);
  if (!out) throw std::runtime_error("write_mask: stream failure");
}

ObservationMask read_mask(std::istream& in) {
  const Shape shape = get_header(in, "MASK");
  const auto count = get_le<std::uint64_t>(in);
  if (count > shape.numel()) throw FormatError("mask count exceeds tensor size");
  std::vector<std::uint64_t> offsets(count);
  for (std::size_t i = 0; i < count; ++i) {
    offsets[i] = get_le<std::uint64_t>(in);
    if (i > 0 && offsets[i] <= offsets[i - 1]) throw FormatError("mask offsets not strictly ascending");
  }
  try {
    return ObservationMask(shape, std::move(offsets));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

DenseTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(in);
}

void write_mask(const std::filesystem::path& path, const ObservationMask& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_mask(out, m);
}

ObservationMask read_mask(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_mask(in);
}

}  // namespace enr

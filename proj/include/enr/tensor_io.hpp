#pragma once

// Binary tensor and mask files.
//
// TNSR1: "TNSR", version byte 1, u32 order d, d x u32 dims, then prod(dims)
//        IEEE-754 doubles in first-index-fastest order.
// MASK : "MASK", version byte 1, u32 order d, d x u32 dims, u64 count, then
//        count u64 linear offsets in ascending order.
// All integers and reals are little-endian regardless of the host.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "enr/tensor.hpp"

namespace enr {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_tensor(std::ostream& out, const DenseTensor& t);
DenseTensor read_tensor(std::istream& in);
void write_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor read_tensor(const std::filesystem::path& path);

void write_mask(std::ostream& out, const ObservationMask& m);
ObservationMask read_mask(std::istream& in);
void write_mask(const std::filesystem::path& path, const ObservationMask& m);
ObservationMask read_mask(const std::filesystem::path& path);

}  // namespace enr

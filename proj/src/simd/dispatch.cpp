#include <atomic>
#include <cstdlib>
#include <string>

#include "enr/simd/kernels.hpp"

namespace enr::simd {

#if defined(ENR_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(ENR_HAVE_NEON)
const KernelTable& neon_table();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(ENR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(ENR_HAVE_NEON)
  // Advanced SIMD is mandatory on AArch64.
  return &neon_table();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* detect() {
  const char* env = std::getenv("ENR_SIMD");
  const std::string wanted = env != nullptr ? env : "auto";
  if (wanted == "scalar") return &scalar_kernels();
  if (wanted == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  if (wanted == "neon" && neon_kernels() != nullptr) return neon_kernels();
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelTable* table = nullptr;
  switch (isa) {
    case Isa::Scalar: table = &scalar_kernels(); break;
    case Isa::Avx2: table = avx2_kernels(); break;
    case Isa::Neon: table = neon_kernels(); break;
  }
  if (table == nullptr) return false;
  current().store(table, std::memory_order_release);
  return true;
}

}  // namespace enr::simd

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmib/simd/kernels.hpp"

namespace cmib::simd {
namespace {

Isa detect() {
  if (const char* env = std::getenv("CMIB_SIMD"); env && std::string_view(env) == "scalar") {
    return Isa::kScalar;
  }
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(CMIB_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument(std::string("SIMD variant not supported here: ") + isa_name(isa));
  }
  current().store(isa, std::memory_order_relaxed);
}

template <>
const KernelTable<float>& kernels_for<float>(Isa isa) {
#ifdef CMIB_HAVE_AVX2
  if (isa == Isa::kAvx2) return avx2::table_f32();
#endif
  (void)isa;
  return scalar::table_f32();
}

template <>
const KernelTable<double>& kernels_for<double>(Isa isa) {
#ifdef CMIB_HAVE_AVX2
  if (isa == Isa::kAvx2) return avx2::table_f64();
#endif
  (void)isa;
  return scalar::table_f64();
}

template <>
const KernelTable<float>& kernels<float>() {
  return kernels_for<float>(active_isa());
}

template <>
const KernelTable<double>& kernels<double>() {
  return kernels_for<double>(active_isa());
}

}  // namespace cmib::simd

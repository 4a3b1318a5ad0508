#pragma once

#include <cstddef>

// Dense kernels behind the autodiff engine. Every entry point has a portable
// scalar reference implementation; an AVX2/FMA variant is compiled in a
// separate translation unit and picked at runtime when the CPU supports it.
// Set CMIB_SIMD=scalar in the environment to force the reference path.
//
// All matrices are row-major and densely packed.

namespace cmib::simd {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);

// The variant currently used by kernels<T>().
Isa active_isa();
// Overrides the runtime choice (tests, benchmarks). Throws
// std::invalid_argument when the CPU lacks the requested variant.
void set_active_isa(Isa isa);

template <class T>
struct KernelTable {
  // C[MxN] (+)= A[MxK] * B[KxN]
  void (*gemm_nn)(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
                  bool accumulate);
  // C[MxN] (+)= A[MxK] * B[NxK]^T
  void (*gemm_nt)(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
                  bool accumulate);
  // C[MxN] (+)= A[KxM]^T * B[KxN]
  void (*gemm_tn)(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
                  bool accumulate);
  T (*dot)(std::size_t n, const T* a, const T* b);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
};

template <class T>
const KernelTable<T>& kernels();

template <class T>
const KernelTable<T>& kernels_for(Isa isa);

namespace scalar {
const KernelTable<float>& table_f32();
const KernelTable<double>& table_f64();
}  // namespace scalar

#ifdef CMIB_HAVE_AVX2
namespace avx2 {
const KernelTable<float>& table_f32();
const KernelTable<double>& table_f64();
}  // namespace avx2
#endif

}  // namespace cmib::simd

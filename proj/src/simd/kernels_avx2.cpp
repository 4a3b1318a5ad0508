// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check, so
// keep this file free of inline library code that could be merged into
// callers built for the baseline ISA.
#include <immintrin.h>

#include "cmib/simd/kernels.hpp"

namespace cmib::simd::avx2 {
namespace {

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_hadd_ps(s, s);
  s = _mm_hadd_ps(s, s);
  return _mm_cvtss_f32(s);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_hadd_pd(s, s);
  return _mm_cvtsd_f64(s);
}

// y[0..n) += a * x[0..n)
inline void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    _mm256_storeu_ps(y + j, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + j), _mm256_loadu_ps(y + j)));
  }
  for (; j < n; ++j) y[j] += a * x[j];
}

inline void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
  }
  for (; j < n; ++j) y[j] += a * x[j];
}

float dot_f32(std::size_t n, const float* a, const float* b) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot_f64(std::size_t n, const double* a, const double* b) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f32_entry(std::size_t n, float a, const float* x, float* y) { axpy_f32(n, a, x, y); }
void axpy_f64_entry(std::size_t n, double a, const double* x, double* y) { axpy_f64(n, a, x, y); }

#define CMIB_AVX2_GEMM(T, SUFFIX)                                                             \
  void gemm_nn_##SUFFIX(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, \
                        T* C, bool accumulate) {                                              \
    for (std::size_t i = 0; i < M; ++i) {                                                     \
      T* c = C + i * N;                                                                       \
      if (!accumulate) {                                                                      \
        for (std::size_t j = 0; j < N; ++j) c[j] = T(0);                                      \
      }                                                                                       \
      for (std::size_t k = 0; k < K; ++k) axpy_##SUFFIX(N, A[i * K + k], B + k * N, c);       \
    }                                                                                         \
  }                                                                                           \
  void gemm_nt_##SUFFIX(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, \
                        T* C, bool accumulate) {                                              \
    for (std::size_t i = 0; i < M; ++i) {                                                     \
      for (std::size_t j = 0; j < N; ++j) {                                                   \
        const T s = dot_##SUFFIX(K, A + i * K, B + j * K);                                    \
        C[i * N + j] = accumulate ? C[i * N + j] + s : s;                                     \
      }                                                                                       \
    }                                                                                         \
  }                                                                                           \
  void gemm_tn_##SUFFIX(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, \
                        T* C, bool accumulate) {                                              \
    if (!accumulate) {                                                                        \
      for (std::size_t i = 0; i < M * N; ++i) C[i] = T(0);                                    \
    }                                                                                         \
    for (std::size_t k = 0; k < K; ++k) {                                                     \
      for (std::size_t i = 0; i < M; ++i) axpy_##SUFFIX(N, A[k * M + i], B + k * N, C + i * N); \
    }                                                                                         \
  }

CMIB_AVX2_GEMM(float, f32)
CMIB_AVX2_GEMM(double, f64)
#undef CMIB_AVX2_GEMM

const KernelTable<float> kF32{&gemm_nn_f32, &gemm_nt_f32, &gemm_tn_f32, &dot_f32, &axpy_f32_entry};
const KernelTable<double> kF64{&gemm_nn_f64, &gemm_nt_f64, &gemm_tn_f64, &dot_f64,
                               &axpy_f64_entry};

}  // namespace

const KernelTable<float>& table_f32() { return kF32; }
const KernelTable<double>& table_f64() { return kF64; }

}  // namespace cmib::simd::avx2

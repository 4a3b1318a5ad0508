#include "cmib/simd/kernels.hpp"

namespace cmib::simd::scalar {
namespace {

template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    T* c = C + i * N;
    if (!accumulate) {
      for (std::size_t j = 0; j < N; ++j) c[j] = T(0);
    }
    for (std::size_t k = 0; k < K; ++k) {
      const T a = A[i * K + k];
      const T* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

template <class T>
T dot(std::size_t n, const T* a, const T* b) {
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      const T s = dot(K, A + i * K, B + j * K);
      C[i * N + j] = accumulate ? C[i * N + j] + s : s;
    }
  }
}

template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C,
             bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < M * N; ++i) C[i] = T(0);
  }
  for (std::size_t k = 0; k < K; ++k) {
    const T* b = B + k * N;
    for (std::size_t i = 0; i < M; ++i) {
      const T a = A[k * M + i];
      T* c = C + i * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
const KernelTable<T> kTable{&gemm_nn<T>, &gemm_nt<T>, &gemm_tn<T>, &dot<T>, &axpy<T>};

}  // namespace

const KernelTable<float>& table_f32() { return kTable<float>; }
const KernelTable<double>& table_f64() { return kTable<double>; }

}  // namespace cmib::simd::scalar

#pragma once

// Data-parallel inner loops behind the tensor engine.
//
// Every kernel has a scalar reference and, where the CPU allows, a vector
// variant selected once at startup. The vector variants perform the same
// floating-point operations in the same order as the reference (products
// are fused with std::fma / vfmadd, accumulation runs over k in increasing
// order), so results are bit-identical whichever variant runs.

#include <cmath>
#include <cstddef>
#include <string_view>

namespace crossgen::simd {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

struct AdamCoefficients {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  // C[m,n] += A[m,k] * B[k,n]; all row-major with leading dimensions.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc);
  // C[m,n] += A^T * B where A is stored [k,m].
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc);
  // Bias-corrected Adam update over n contiguous parameters.
  void (*adam_update)(std::size_t n, float* param, float* m, float* v, const float* grad,
                      const AdamCoefficients& coeff);
};

const KernelTable& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Kernel table in use. Chosen on first call: the CROSSGEN_SIMD environment
// variable (scalar|avx2|neon|auto) if set, else the best supported variant.
const KernelTable& active();
// Overrides the active table; throws if the variant is unavailable.
void select(Isa isa);

namespace reference {

// Scalar templates shared by the float reference table and the 64-bit path
// used for gradient validation.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[i * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[i * lda + p], b[p * ldb + j], acc);
      c[i * ldc + j] = acc;
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = c[i * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[p * lda + i], b[p * ldb + j], acc);
      c[i * ldc + j] = acc;
    }
  }
}

template <typename T>
void adam_update(std::size_t n, T* param, T* m, T* v, const T* grad, const AdamCoefficients& c) {
  const T b1 = c.beta1, b2 = c.beta2;
  const T one_minus_b1 = T(1) - b1, one_minus_b2 = T(1) - b2;
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + one_minus_b1 * g;
    v[i] = b2 * v[i] + one_minus_b2 * (g * g);
    const T m_hat = m[i] / T(c.bias_correction1);
    const T v_hat = v[i] / T(c.bias_correction2);
    param[i] = param[i] - T(c.lr) * (m_hat / (std::sqrt(v_hat) + T(c.eps)));
  }
}

}  // namespace reference

}  // namespace crossgen::simd

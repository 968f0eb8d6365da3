// AVX2+FMA variants. Compiled with -mavx2 -mfma; only entered after the
// runtime CPU check in avx2_kernels().

#include "crossgen/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>

namespace crossgen::simd {

namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 512;

// Broadcast-A micro-kernels. kTransA selects A[i,p] = a[p*lda+i].
template <bool kTransA>
inline float a_at(const float* a, std::size_t lda, std::size_t i, std::size_t p) {
  return kTransA ? a[p * lda + i] : a[i * lda + p];
}

template <bool kTransA>
void block_4x16(std::size_t k0, std::size_t k1, const float* a, std::size_t lda, const float* b,
                std::size_t ldb, float* c, std::size_t ldc, std::size_t i, std::size_t j) {
  float* c0 = c + i * ldc + j;
  float* c1 = c0 + ldc;
  float* c2 = c1 + ldc;
  float* c3 = c2 + ldc;
  __m256 r00 = _mm256_loadu_ps(c0), r01 = _mm256_loadu_ps(c0 + 8);
  __m256 r10 = _mm256_loadu_ps(c1), r11 = _mm256_loadu_ps(c1 + 8);
  __m256 r20 = _mm256_loadu_ps(c2), r21 = _mm256_loadu_ps(c2 + 8);
  __m256 r30 = _mm256_loadu_ps(c3), r31 = _mm256_loadu_ps(c3 + 8);
  for (std::size_t p = k0; p < k1; ++p) {
    const float* brow = b + p * ldb + j;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    __m256 av = _mm256_set1_ps(a_at<kTransA>(a, lda, i, p));
    r00 = _mm256_fmadd_ps(av, b0, r00);
    r01 = _mm256_fmadd_ps(av, b1, r01);
    av = _mm256_set1_ps(a_at<kTransA>(a, lda, i + 1, p));
    r10 = _mm256_fmadd_ps(av, b0, r10);
    r11 = _mm256_fmadd_ps(av, b1, r11);
    av = _mm256_set1_ps(a_at<kTransA>(a, lda, i + 2, p));
    r20 = _mm256_fmadd_ps(av, b0, r20);
    r21 = _mm256_fmadd_ps(av, b1, r21);
    av = _mm256_set1_ps(a_at<kTransA>(a, lda, i + 3, p));
    r30 = _mm256_fmadd_ps(av, b0, r30);
    r31 = _mm256_fmadd_ps(av, b1, r31);
  }
  _mm256_storeu_ps(c0, r00);
  _mm256_storeu_ps(c0 + 8, r01);
  _mm256_storeu_ps(c1, r10);
  _mm256_storeu_ps(c1 + 8, r11);
  _mm256_storeu_ps(c2, r20);
  _mm256_storeu_ps(c2 + 8, r21);
  _mm256_storeu_ps(c3, r30);
  _mm256_storeu_ps(c3 + 8, r31);
}

template <bool kTransA>
void block_1x8(std::size_t k0, std::size_t k1, const float* a, std::size_t lda, const float* b,
               std::size_t ldb, float* c, std::size_t ldc, std::size_t i, std::size_t j) {
  float* crow = c + i * ldc + j;
  __m256 r = _mm256_loadu_ps(crow);
  for (std::size_t p = k0; p < k1; ++p)
    r = _mm256_fmadd_ps(_mm256_set1_ps(a_at<kTransA>(a, lda, i, p)), _mm256_loadu_ps(b + p * ldb + j), r);
  _mm256_storeu_ps(crow, r);
}

template <bool kTransA>
void element(std::size_t k0, std::size_t k1, const float* a, std::size_t lda, const float* b,
             std::size_t ldb, float* c, std::size_t ldc, std::size_t i, std::size_t j) {
  float acc = c[i * ldc + j];
  for (std::size_t p = k0; p < k1; ++p) acc = std::fma(a_at<kTransA>(a, lda, i, p), b[p * ldb + j], acc);
  c[i * ldc + j] = acc;
}

template <bool kTransA>
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t k1 = std::min(k, k0 + kBlockK);
    for (std::size_t n0 = 0; n0 < n; n0 += kBlockN) {
      const std::size_t n1 = std::min(n, n0 + kBlockN);
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        std::size_t j = n0;
        for (; j + 16 <= n1; j += 16) block_4x16<kTransA>(k0, k1, a, lda, b, ldb, c, ldc, i, j);
        for (; j + 8 <= n1; j += 8)
          for (std::size_t r = 0; r < 4; ++r) block_1x8<kTransA>(k0, k1, a, lda, b, ldb, c, ldc, i + r, j);
        for (; j < n1; ++j)
          for (std::size_t r = 0; r < 4; ++r) element<kTransA>(k0, k1, a, lda, b, ldb, c, ldc, i + r, j);
      }
      for (; i < m; ++i) {
        std::size_t j = n0;
        for (; j + 8 <= n1; j += 8) block_1x8<kTransA>(k0, k1, a, lda, b, ldb, c, ldc, i, j);
        for (; j < n1; ++j) element<kTransA>(k0, k1, a, lda, b, ldb, c, ldc, i, j);
      }
    }
  }
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm<false>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm<true>(m, n, k, a, lda, b, ldb, c, ldc);
}

void adam_avx2(std::size_t n, float* param, float* m, float* v, const float* grad,
               const AdamCoefficients& coeff) {
  const __m256 b1 = _mm256_set1_ps(coeff.beta1);
  const __m256 b2 = _mm256_set1_ps(coeff.beta2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - coeff.beta1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - coeff.beta2);
  const __m256 bc1 = _mm256_set1_ps(coeff.bias_correction1);
  const __m256 bc2 = _mm256_set1_ps(coeff.bias_correction2);
  const __m256 lr = _mm256_set1_ps(coeff.lr);
  const __m256 eps = _mm256_set1_ps(coeff.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    // Separate mul/add (no fusion) to match the scalar reference exactly.
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 m_hat = _mm256_div_ps(mi, bc1);
    const __m256 v_hat = _mm256_div_ps(vi, bc2);
    const __m256 step = _mm256_mul_ps(lr, _mm256_div_ps(m_hat, _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps)));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  if (i < n) reference::adam_update<float>(n - i, param + i, m + i, v + i, grad + i, coeff);
}

constexpr KernelTable kAvx2{Isa::avx2, gemm_nn_avx2, gemm_tn_avx2, adam_avx2};

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kAvx2 : nullptr;
}

}  // namespace crossgen::simd

#else

namespace crossgen::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace crossgen::simd

#endif

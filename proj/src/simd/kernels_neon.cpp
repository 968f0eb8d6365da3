// NEON variants for aarch64, where Advanced SIMD (with fused vfmaq) is part
// of the base ISA and needs no runtime check.

#include "crossgen/simd/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>

namespace crossgen::simd {

namespace {

constexpr std::size_t kBlockK = 256;

template <bool kTransA>
inline float a_at(const float* a, std::size_t lda, std::size_t i, std::size_t p) {
  return kTransA ? a[p * lda + i] : a[i * lda + p];
}

template <bool kTransA>
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t k1 = std::min(k, k0 + kBlockK);
    for (std::size_t i = 0; i < m; ++i) {
      float* crow = c + i * ldc;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        float32x4_t r0 = vld1q_f32(crow + j);
        float32x4_t r1 = vld1q_f32(crow + j + 4);
        for (std::size_t p = k0; p < k1; ++p) {
          const float32x4_t av = vdupq_n_f32(a_at<kTransA>(a, lda, i, p));
          r0 = vfmaq_f32(r0, av, vld1q_f32(b + p * ldb + j));
          r1 = vfmaq_f32(r1, av, vld1q_f32(b + p * ldb + j + 4));
        }
        vst1q_f32(crow + j, r0);
        vst1q_f32(crow + j + 4, r1);
      }
      for (; j < n; ++j) {
        float acc = crow[j];
        for (std::size_t p = k0; p < k1; ++p) acc = std::fma(a_at<kTransA>(a, lda, i, p), b[p * ldb + j], acc);
        crow[j] = acc;
      }
    }
  }
}

void gemm_nn_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm<false>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm<true>(m, n, k, a, lda, b, ldb, c, ldc);
}

void adam_neon(std::size_t n, float* param, float* m, float* v, const float* grad,
               const AdamCoefficients& coeff) {
  const float32x4_t b1 = vdupq_n_f32(coeff.beta1);
  const float32x4_t b2 = vdupq_n_f32(coeff.beta2);
  const float32x4_t omb1 = vdupq_n_f32(1.0f - coeff.beta1);
  const float32x4_t omb2 = vdupq_n_f32(1.0f - coeff.beta2);
  const float32x4_t bc1 = vdupq_n_f32(coeff.bias_correction1);
  const float32x4_t bc2 = vdupq_n_f32(coeff.bias_correction2);
  const float32x4_t lr = vdupq_n_f32(coeff.lr);
  const float32x4_t eps = vdupq_n_f32(coeff.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t g = vld1q_f32(grad + i);
    const float32x4_t mi = vaddq_f32(vmulq_f32(b1, vld1q_f32(m + i)), vmulq_f32(omb1, g));
    const float32x4_t vi = vaddq_f32(vmulq_f32(b2, vld1q_f32(v + i)), vmulq_f32(omb2, vmulq_f32(g, g)));
    vst1q_f32(m + i, mi);
    vst1q_f32(v + i, vi);
    const float32x4_t m_hat = vdivq_f32(mi, bc1);
    const float32x4_t v_hat = vdivq_f32(vi, bc2);
    const float32x4_t step = vmulq_f32(lr, vdivq_f32(m_hat, vaddq_f32(vsqrtq_f32(v_hat), eps)));
    vst1q_f32(param + i, vsubq_f32(vld1q_f32(param + i), step));
  }
  if (i < n) reference::adam_update<float>(n - i, param + i, m + i, v + i, grad + i, coeff);
}

constexpr KernelTable kNeon{Isa::neon, gemm_nn_neon, gemm_tn_neon, adam_neon};

}  // namespace

const KernelTable* neon_kernels() { return &kNeon; }

}  // namespace crossgen::simd

#else

namespace crossgen::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace crossgen::simd

#endif

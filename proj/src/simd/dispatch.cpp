#include <cstdlib>
#include <string>

#include "crossgen/simd/kernels.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::simd {

namespace {

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  reference::gemm_nn<float>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  reference::gemm_tn<float>(m, n, k, a, lda, b, ldb, c, ldc);
}

void adam_scalar(std::size_t n, float* param, float* m, float* v, const float* grad,
                 const AdamCoefficients& coeff) {
  reference::adam_update<float>(n, param, m, v, grad, coeff);
}

constexpr KernelTable kScalar{Isa::scalar, gemm_nn_scalar, gemm_tn_scalar, adam_scalar};

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar: return &kScalar;
    case Isa::avx2: return avx2_kernels();
    case Isa::neon: return neon_kernels();
  }
  return nullptr;
}

const KernelTable* pick_default() {
  if (const char* env = std::getenv("CROSSGEN_SIMD")) {
    const std::string choice = env;
    if (choice == "scalar") return &kScalar;
    if (choice == "avx2" && avx2_kernels()) return avx2_kernels();
    if (choice == "neon" && neon_kernels()) return neon_kernels();
    // "auto" or an unavailable request falls through to detection.
  }
  if (auto* t = avx2_kernels()) return t;
  if (auto* t = neon_kernels()) return t;
  return &kScalar;
}

const KernelTable*& current() {
  static const KernelTable* table = pick_default();
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable& active() { return *current(); }

void select(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (t == nullptr) throw Error("SIMD variant not available: " + std::string(to_string(isa)));
  current() = t;
}

}  // namespace crossgen::simd

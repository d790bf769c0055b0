#pragma once

// Internal ISA dispatch table. Kept free of standard-library templates so
// that translation units compiled with wider ISA flags never emit inline
// functions the linker could merge into baseline code.

#include <cstddef>

namespace ssd::kernels::detail {

struct KernelTable {
  float (*dot)(const float* a, const float* b, std::size_t n);
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  void (*scale)(float alpha, float* x, std::size_t n);
  void (*lerp)(float* target, const float* source, float m, std::size_t n);
  void (*relu)(const float* in, float* out, std::size_t n);
  void (*relu_backward)(const float* pre, const float* grad_out, float* grad_in,
                        std::size_t n);
  void (*sgd_momentum)(float* param, const float* grad, float* velocity,
                       std::size_t n, float lr, float momentum,
                       float weight_decay);
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate);
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate);
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_table();
const KernelTable* neon_table();

}  // namespace ssd::kernels::detail

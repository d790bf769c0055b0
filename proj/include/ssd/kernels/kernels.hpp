#pragma once

// Dense float32 kernels used by every arithmetic inner loop in the library.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, a SIMD implementation (AVX2+FMA on x86-64, NEON on AArch64).
// The implementation is chosen once per process from CPU capabilities; the
// SSD_ISA environment variable ("scalar", "avx2", "neon") or set_isa() can
// pin it. Elementwise kernels are bit-identical across ISAs; reductions
// (dot, gemm) differ only by summation order.
//
// All matrices are dense row-major.

#include <cstddef>
#include <span>
#include <string_view>

namespace ssd::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

/// True when the implementation was compiled in and the CPU can run it.
bool isa_supported(Isa isa);

Isa active_isa();

/// Throws std::invalid_argument when `isa` is not supported.
void set_isa(Isa isa);

/// Pins an ISA for the lifetime of the object, restoring the previous one.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

float dot(std::span<const float> a, std::span<const float> b);

// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);

// x *= alpha
void scale(float alpha, std::span<float> x);

// target = m * target + (1 - m) * source, elementwise.
void lerp(std::span<float> target, std::span<const float> source, float m);

void relu(std::span<const float> in, std::span<float> out);

// grad_in = (pre > 0) ? grad_out : 0
void relu_backward(std::span<const float> pre, std::span<const float> grad_out,
                   std::span<float> grad_in);

// velocity = momentum * velocity + (grad + weight_decay * param)
// param   -= lr * velocity
void sgd_momentum(std::span<float> param, std::span<const float> grad,
                  std::span<float> velocity, float lr, float momentum,
                  float weight_decay);

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             std::span<const float> a, std::span<const float> b,
             std::span<float> c, bool accumulate);

// C[m x n] (+)= A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             std::span<const float> a, std::span<const float> b,
             std::span<float> c, bool accumulate);

// C[m x n] (+)= A[k x m]^T * B[k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             std::span<const float> a, std::span<const float> b,
             std::span<float> c, bool accumulate);

}  // namespace ssd::kernels

// AArch64 NEON variants; the translation unit is empty elsewhere.

#include "kernel_table.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace ssd::kernels::detail {
namespace {

float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
  float sum = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(va, vld1q_f32(x + i))));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_neon(float alpha, float* x, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(x + i, vmulq_f32(va, vld1q_f32(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void lerp_neon(float* target, const float* source, float m, std::size_t n) {
  const float w = 1.0f - m;
  const float32x4_t vm = vdupq_n_f32(m);
  const float32x4_t vw = vdupq_n_f32(w);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t t = vmulq_f32(vm, vld1q_f32(target + i));
    const float32x4_t s = vmulq_f32(vw, vld1q_f32(source + i));
    vst1q_f32(target + i, vaddq_f32(t, s));
  }
  for (; i < n; ++i) target[i] = m * target[i] + w * source[i];
}

inline float32x4_t select_positive(float32x4_t pre, float32x4_t value) {
  const uint32x4_t mask = vcgtq_f32(pre, vdupq_n_f32(0.0f));
  return vreinterpretq_f32_u32(vandq_u32(mask, vreinterpretq_u32_f32(value)));
}

void relu_neon(const float* in, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t x = vld1q_f32(in + i);
    vst1q_f32(out + i, select_positive(x, x));
  }
  for (; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward_neon(const float* pre, const float* grad_out,
                        float* grad_in, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    vst1q_f32(grad_in + i,
              select_positive(vld1q_f32(pre + i), vld1q_f32(grad_out + i)));
  for (; i < n; ++i) grad_in[i] = pre[i] > 0.0f ? grad_out[i] : 0.0f;
}

void sgd_momentum_neon(float* param, const float* grad, float* velocity,
                       std::size_t n, float lr, float momentum,
                       float weight_decay) {
  const float32x4_t vlr = vdupq_n_f32(lr);
  const float32x4_t vmom = vdupq_n_f32(momentum);
  const float32x4_t vwd = vdupq_n_f32(weight_decay);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t p = vld1q_f32(param + i);
    const float32x4_t g = vaddq_f32(vld1q_f32(grad + i), vmulq_f32(vwd, p));
    const float32x4_t v = vaddq_f32(vmulq_f32(vmom, vld1q_f32(velocity + i)), g);
    vst1q_f32(velocity + i, v);
    vst1q_f32(param + i, vsubq_f32(p, vmulq_f32(vlr, v)));
  }
  for (; i < n; ++i) {
    const float g = grad[i] + weight_decay * param[i];
    velocity[i] = momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

inline void gemm_rows_neon(std::size_t m, std::size_t n, std::size_t k,
                           const float* a, std::size_t a_row, std::size_t a_col,
                           const float* b, float* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      float32x4_t c0, c1, c2, c3;
      if (accumulate) {
        c0 = vld1q_f32(crow + j);
        c1 = vld1q_f32(crow + j + 4);
        c2 = vld1q_f32(crow + j + 8);
        c3 = vld1q_f32(crow + j + 12);
      } else {
        c0 = c1 = c2 = c3 = vdupq_n_f32(0.0f);
      }
      for (std::size_t p = 0; p < k; ++p) {
        const float32x4_t av = vdupq_n_f32(a[i * a_row + p * a_col]);
        const float* brow = b + p * n + j;
        c0 = vfmaq_f32(c0, av, vld1q_f32(brow));
        c1 = vfmaq_f32(c1, av, vld1q_f32(brow + 4));
        c2 = vfmaq_f32(c2, av, vld1q_f32(brow + 8));
        c3 = vfmaq_f32(c3, av, vld1q_f32(brow + 12));
      }
      vst1q_f32(crow + j, c0);
      vst1q_f32(crow + j + 4, c1);
      vst1q_f32(crow + j + 8, c2);
      vst1q_f32(crow + j + 12, c3);
    }
    for (; j < n; ++j) {
      float sum = 0.0f;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * a_row + p * a_col] * b[p * n + j];
      crow[j] = accumulate ? crow[j] + sum : sum;
    }
  }
}

void gemm_nn_neon(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  gemm_rows_neon(m, n, k, a, k, 1, b, c, accumulate);
}

void gemm_tn_neon(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  gemm_rows_neon(m, n, k, a, 1, m, b, c, accumulate);
}

void gemm_nt_neon(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float sum = dot_neon(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

constexpr KernelTable kNeonTable{
    dot_neon,          axpy_neon,    scale_neon,   lerp_neon,
    relu_neon,         relu_backward_neon,         sgd_momentum_neon,
    gemm_nn_neon,      gemm_nt_neon, gemm_tn_neon,
};

}  // namespace

const KernelTable* neon_table() { return &kNeonTable; }

}  // namespace ssd::kernels::detail

#else

namespace ssd::kernels::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace ssd::kernels::detail

#endif

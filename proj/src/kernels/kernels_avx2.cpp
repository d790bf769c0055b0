// Compiled with -mavx2 -mfma. Only reached through the dispatch table after
// a runtime CPU check.

#include "kernel_table.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace ssd::kernels::detail {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  __m256 acc2 = _mm256_setzero_ps();
  __m256 acc3 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8),
                           _mm256_loadu_ps(b + i + 8), acc1);
    acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 16),
                           _mm256_loadu_ps(b + i + 16), acc2);
    acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 24),
                           _mm256_loadu_ps(b + i + 24), acc3);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float sum = hsum(_mm256_add_ps(_mm256_add_ps(acc0, acc1),
                                 _mm256_add_ps(acc2, acc3)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_add_ps(vy, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(float alpha, float* x, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void lerp_avx2(float* target, const float* source, float m, std::size_t n) {
  const float w = 1.0f - m;
  const __m256 vm = _mm256_set1_ps(m);
  const __m256 vw = _mm256_set1_ps(w);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 t = _mm256_mul_ps(vm, _mm256_loadu_ps(target + i));
    const __m256 s = _mm256_mul_ps(vw, _mm256_loadu_ps(source + i));
    _mm256_storeu_ps(target + i, _mm256_add_ps(t, s));
  }
  for (; i < n; ++i) target[i] = m * target[i] + w * source[i];
}

void relu_avx2(const float* in, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(in + i), zero));
  for (; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward_avx2(const float* pre, const float* grad_out,
                        float* grad_in, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask =
        _mm256_cmp_ps(_mm256_loadu_ps(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(grad_in + i,
                     _mm256_and_ps(mask, _mm256_loadu_ps(grad_out + i)));
  }
  for (; i < n; ++i) grad_in[i] = pre[i] > 0.0f ? grad_out[i] : 0.0f;
}

void sgd_momentum_avx2(float* param, const float* grad, float* velocity,
                       std::size_t n, float lr, float momentum,
                       float weight_decay) {
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 vmom = _mm256_set1_ps(momentum);
  const __m256 vwd = _mm256_set1_ps(weight_decay);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 p = _mm256_loadu_ps(param + i);
    const __m256 g = _mm256_add_ps(_mm256_loadu_ps(grad + i), _mm256_mul_ps(vwd, p));
    const __m256 v =
        _mm256_add_ps(_mm256_mul_ps(vmom, _mm256_loadu_ps(velocity + i)), g);
    _mm256_storeu_ps(velocity + i, v);
    _mm256_storeu_ps(param + i, _mm256_sub_ps(p, _mm256_mul_ps(vlr, v)));
  }
  for (; i < n; ++i) {
    const float g = grad[i] + weight_decay * param[i];
    velocity[i] = momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

// Shared body of gemm_nn and gemm_tn: row i of C is a combination of the k
// rows of B with coefficients a(i, p) = a[i * a_row + p * a_col].
inline void gemm_rows_avx2(std::size_t m, std::size_t n, std::size_t k,
                           const float* a, std::size_t a_row, std::size_t a_col,
                           const float* b, float* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 32 <= n; j += 32) {
      __m256 c0, c1, c2, c3;
      if (accumulate) {
        c0 = _mm256_loadu_ps(crow + j);
        c1 = _mm256_loadu_ps(crow + j + 8);
        c2 = _mm256_loadu_ps(crow + j + 16);
        c3 = _mm256_loadu_ps(crow + j + 24);
      } else {
        c0 = c1 = c2 = c3 = _mm256_setzero_ps();
      }
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(a[i * a_row + p * a_col]);
        const float* brow = b + p * n + j;
        c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow), c0);
        c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), c1);
        c2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 16), c2);
        c3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 24), c3);
      }
      _mm256_storeu_ps(crow + j, c0);
      _mm256_storeu_ps(crow + j + 8, c1);
      _mm256_storeu_ps(crow + j + 16, c2);
      _mm256_storeu_ps(crow + j + 24, c3);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 c0 = accumulate ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(a[i * a_row + p * a_col]);
        c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b + p * n + j), c0);
      }
      _mm256_storeu_ps(crow + j, c0);
    }
    for (; j < n; ++j) {
      float sum = 0.0f;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * a_row + p * a_col] * b[p * n + j];
      crow[j] = accumulate ? crow[j] + sum : sum;
    }
  }
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  gemm_rows_avx2(m, n, k, a, k, 1, b, c, accumulate);
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  gemm_rows_avx2(m, n, k, a, 1, m, b, c, accumulate);
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float sum = dot_avx2(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

constexpr KernelTable kAvx2Table{
    dot_avx2,          axpy_avx2,    scale_avx2,   lerp_avx2,
    relu_avx2,         relu_backward_avx2,         sgd_momentum_avx2,
    gemm_nn_avx2,      gemm_nt_avx2, gemm_tn_avx2,
};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2Table; }

}  // namespace ssd::kernels::detail

#else

namespace ssd::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace ssd::kernels::detail

#endif

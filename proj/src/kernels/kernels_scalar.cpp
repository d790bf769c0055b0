#include "kernel_table.hpp"

namespace ssd::kernels::detail {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(float alpha, float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void lerp_scalar(float* target, const float* source, float m, std::size_t n) {
  const float w = 1.0f - m;
  for (std::size_t i = 0; i < n; ++i) target[i] = m * target[i] + w * source[i];
}

void relu_scalar(const float* in, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void relu_backward_scalar(const float* pre, const float* grad_out,
                          float* grad_in, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    grad_in[i] = pre[i] > 0.0f ? grad_out[i] : 0.0f;
}

void sgd_momentum_scalar(float* param, const float* grad, float* velocity,
                         std::size_t n, float lr, float momentum,
                         float weight_decay) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i] + weight_decay * param[i];
    velocity[i] = momentum * velocity[i] + g;
    param[i] -= lr * velocity[i];
  }
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float sum = 0.0f;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float sum = dot_scalar(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float sum = 0.0f;
      for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
    }
  }
}

constexpr KernelTable kScalarTable{
    dot_scalar,           axpy_scalar,         scale_scalar,
    lerp_scalar,          relu_scalar,         relu_backward_scalar,
    sgd_momentum_scalar,  gemm_nn_scalar,      gemm_nt_scalar,
    gemm_tn_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalarTable; }

}  // namespace ssd::kernels::detail

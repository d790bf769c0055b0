#include "ssd/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_table.hpp"

namespace ssd::kernels {
namespace {

using detail::KernelTable;

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &detail::scalar_table();
    case Isa::avx2:
      return detail::avx2_table();
    case Isa::neon:
      return detail::neon_table();
  }
  return nullptr;
}

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa best_isa() {
  if (const char* env = std::getenv("SSD_ISA"); env != nullptr && *env != '\0') {
    const Isa requested = parse_isa(env);
    if (!isa_supported(requested))
      throw std::invalid_argument(std::string("SSD_ISA=") + env +
                                  " is not supported on this machine");
    return requested;
  }
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

struct Active {
  std::atomic<Isa> isa;
  std::atomic<const KernelTable*> table;
  Active() {
    const Isa chosen = best_isa();
    isa.store(chosen);
    table.store(table_for(chosen));
  }
};

Active& active() {
  static Active instance;
  return instance;
}

const KernelTable& t() { return *active().table.load(std::memory_order_relaxed); }

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("kernels: ") + what);
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw std::invalid_argument("unknown ISA '" + std::string(name) + "'");
}

bool isa_supported(Isa isa) { return table_for(isa) != nullptr && cpu_has(isa); }

Isa active_isa() { return active().isa.load(); }

void set_isa(Isa isa) {
  if (!isa_supported(isa))
    throw std::invalid_argument("ISA " + std::string(isa_name(isa)) +
                                " is not supported on this machine");
  active().table.store(table_for(isa));
  active().isa.store(isa);
}

ScopedIsa::ScopedIsa(Isa isa) : previous_(active_isa()) { set_isa(isa); }
ScopedIsa::~ScopedIsa() { set_isa(previous_); }

float dot(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "dot: length mismatch");
  return t().dot(a.data(), b.data(), a.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  t().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(float alpha, std::span<float> x) { t().scale(alpha, x.data(), x.size()); }

void lerp(std::span<float> target, std::span<const float> source, float m) {
  require(target.size() == source.size(), "lerp: length mismatch");
  t().lerp(target.data(), source.data(), m, target.size());
}

void relu(std::span<const float> in, std::span<float> out) {
  require(in.size() == out.size(), "relu: length mismatch");
  t().relu(in.data(), out.data(), in.size());
}

void relu_backward(std::span<const float> pre, std::span<const float> grad_out,
                   std::span<float> grad_in) {
  require(pre.size() == grad_out.size() && pre.size() == grad_in.size(),
          "relu_backward: length mismatch");
  t().relu_backward(pre.data(), grad_out.data(), grad_in.data(), pre.size());
}

void sgd_momentum(std::span<float> param, std::span<const float> grad,
                  std::span<float> velocity, float lr, float momentum,
                  float weight_decay) {
  require(param.size() == grad.size() && param.size() == velocity.size(),
          "sgd_momentum: length mismatch");
  t().sgd_momentum(param.data(), grad.data(), velocity.data(), param.size(), lr,
                   momentum, weight_decay);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             std::span<const float> a, std::span<const float> b,
             std::span<float> c, bool accumulate) {
  require(a.size() == m * k && b.size() == k * n && c.size() == m * n,
          "gemm_nn: shape mismatch");
  t().gemm_nn(m, n, k, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             std::span<const float> a, std::span<const float> b,
             std::span<float> c, bool accumulate) {
  require(a.size() == m * k && b.size() == n * k && c.size() == m * n,
          "gemm_nt: shape mismatch");
  t().gemm_nt(m, n, k, a.data(), b.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             std::span<const float> a, std::span<const float> b,
             std::span<float> c, bool accumulate) {
  require(a.size() == k * m && b.size() == k * n && c.size() == m * n,
          "gemm_tn: shape mismatch");
  t().gemm_tn(m, n, k, a.data(), b.data(), c.data(), accumulate);
}

}  // namespace ssd::kernels

#include <algorithm>
#include <cmath>
#include <string>

#include "ssd/common/error.hpp"
#include "ssd/kernels/kernels.hpp"
#include "ssd/selfsup/selfsup.hpp"

namespace ssd::selfsup {
namespace {

constexpr double kUnitTolerance = 1e-3;

double norm(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  return std::sqrt(sq);
}

void require_unit(std::span<const float> v, const char* what) {
  const double n = norm(v);
  require(n > 0.0 && std::isfinite(n), std::string(what) + ": zero-norm embedding");
  require(std::abs(n - 1.0) <= kUnitTolerance,
          std::string(what) + ": embedding is not unit norm (|v| = " + std::to_string(n) + ")");
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double info_nce_unchecked(std::span<const float> v, std::span<const float> v_pos,
                          const Matrix& negatives, double tau, InfoNceGrad* grad) {
  const std::size_t k = negatives.rows;
  std::vector<double> s(k + 1);
  s[0] = dot(v, v_pos) / tau;
  for (std::size_t j = 0; j < k; ++j) s[j + 1] = dot(v, negatives.row(j)) / tau;
  const double hi = *std::max_element(s.begin(), s.end());
  double sum = 0.0;
  for (double x : s) sum += std::exp(x - hi);
  const double loss = hi + std::log(sum) - s[0];
  if (grad) {
    const std::size_t d = v.size();
    grad->v.assign(d, 0.0);
    grad->v_pos.assign(d, 0.0);
    const double p0 = std::exp(s[0] - hi) / sum;
    for (std::size_t i = 0; i < d; ++i) {
      grad->v[i] = (p0 - 1.0) * v_pos[i] / tau;
      grad->v_pos[i] = (p0 - 1.0) * v[i] / tau;
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double pj = std::exp(s[j + 1] - hi) / sum / tau;
      const auto n = negatives.row(j);
      for (std::size_t i = 0; i < d; ++i) grad->v[i] += pj * n[i];
    }
  }
  // The positive term is part of the denominator, so the loss is >= 0 up to
  // rounding; clamp the rounding.
  return std::max(loss, 0.0);
}

}  // namespace

double info_nce_loss(std::span<const float> v, std::span<const float> v_pos,
                     const Matrix& negatives, double tau, InfoNceGrad* grad) {
  require(tau > 0.0, "info_nce_loss: tau must be > 0");
  require(v.size() == v_pos.size() && (negatives.rows == 0 || negatives.cols == v.size()),
          "info_nce_loss: embedding dimension mismatch");
  require_unit(v, "info_nce_loss");
  require_unit(v_pos, "info_nce_loss");
  for (std::size_t j = 0; j < negatives.rows; ++j) require_unit(negatives.row(j), "info_nce_loss");
  return info_nce_unchecked(v, v_pos, negatives, tau, grad);
}

double info_nce_batch(const Matrix& queries, const Matrix& keys, const Matrix& queue,
                      double tau, Matrix* grad_queries) {
  require(tau > 0.0, "info_nce_batch: tau must be > 0");
  require(queries.rows == keys.rows && queries.cols == keys.cols && queries.rows > 0,
          "info_nce_batch: queries and keys must have the same non-empty shape");
  require(queue.rows == 0 || queue.cols == queries.cols, "info_nce_batch: queue dim mismatch");
  for (std::size_t i = 0; i < queries.rows; ++i) {
    require_unit(queries.row(i), "info_nce_batch");
    require_unit(keys.row(i), "info_nce_batch");
  }
  if (grad_queries) *grad_queries = Matrix(queries.rows, queries.cols);
  const double inv_b = 1.0 / static_cast<double>(queries.rows);
  double total = 0.0;
  InfoNceGrad g;
  for (std::size_t i = 0; i < queries.rows; ++i) {
    total += info_nce_unchecked(queries.row(i), keys.row(i), queue, tau,
                                grad_queries ? &g : nullptr);
    if (grad_queries) {
      auto out = grad_queries->row(i);
      for (std::size_t d = 0; d < out.size(); ++d) out[d] = static_cast<float>(g.v[d] * inv_b);
    }
  }
  return total * inv_b;
}

ContrastiveState make_contrastive_state(std::size_t queue_size, std::size_t embed_dim,
                                        double tau, double momentum, std::uint64_t seed) {
  require(queue_size >= 1 && embed_dim >= 1, "contrastive state: K and dim must be positive");
  require(tau > 0.0, "contrastive state: tau must be > 0");
  require(momentum >= 0.0 && momentum <= 1.0, "contrastive state: momentum must be in [0,1]");
  ContrastiveState state;
  state.tau = tau;
  state.momentum = momentum;
  state.queue = Matrix(queue_size, embed_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> tmp(embed_dim);
  for (std::size_t r = 0; r < queue_size; ++r) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (double& x : tmp) {
        x = normal(rng);
        sq += x * x;
      }
    } while (sq == 0.0);
    const double inv = 1.0 / std::sqrt(sq);
    auto row = state.queue.row(r);
    for (std::size_t d = 0; d < embed_dim; ++d) row[d] = static_cast<float>(tmp[d] * inv);
  }
  return state;
}

void queue_push(ContrastiveState& state, const Matrix& embeddings) {
  require(embeddings.rows <= state.size(),
          "queue_push: batch of " + std::to_string(embeddings.rows) +
              " exceeds queue size " + std::to_string(state.size()));
  require(embeddings.rows == 0 || embeddings.cols == state.embed_dim(),
          "queue_push: embedding dimension mismatch");
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    require_unit(embeddings.row(i), "queue_push");
    auto dst = state.queue.row(state.head);
    const auto src = embeddings.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    state.head = (state.head + 1) % state.size();
  }
}

Matrix ordered_queue(const ContrastiveState& state) {
  Matrix out(state.size(), state.embed_dim());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto src = state.queue.row((state.head + i) % state.size());
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void momentum_update(std::span<float> key, std::span<const float> query, double m) {
  require(m >= 0.0 && m <= 1.0, "momentum_update: m must be in [0,1]");
  require(key.size() == query.size(), "momentum_update: shape mismatch");
  kernels::lerp(key, query, static_cast<float>(m));
}

void momentum_update(std::span<model::Parameter* const> key,
                     std::span<model::Parameter* const> query, double m) {
  require(key.size() == query.size(), "momentum_update: parameter count mismatch");
  for (std::size_t i = 0; i < key.size(); ++i) {
    require(key[i]->shape == query[i]->shape,
            "momentum_update: shape mismatch between '" + key[i]->name + "' and '" +
                query[i]->name + "'");
    momentum_update(key[i]->value, query[i]->value, m);
  }
}

}  // namespace ssd::selfsup

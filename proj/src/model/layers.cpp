#include "ssd/model/layers.hpp"

#include <cmath>

#include "ssd/common/error.hpp"
#include "ssd/kernels/kernels.hpp"

namespace ssd::model {

Linear::Linear(const std::string& name, std::size_t in_features, std::size_t out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", {out_features, in_features}),
      bias_(name + ".bias", {out_features}, false) {}

void Linear::initialize(std::mt19937_64& rng, float gain) {
  init_uniform(weight_, gain / std::sqrt(static_cast<float>(in_)), rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Matrix Linear::forward(const Matrix& x) const {
  require(x.cols == in_, weight_.name + ": expected " + std::to_string(in_) +
                             " input features, got " + std::to_string(x.cols));
  Matrix y(x.rows, out_);
  kernels::gemm_nt(x.rows, out_, in_, x.data, weight_.value, y.data, false);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto row = y.row(i);
    for (std::size_t j = 0; j < out_; ++j) row[j] += bias_.value[j];
  }
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& grad_out, bool input_grad) {
  require(x.rows == grad_out.rows && x.cols == in_ && grad_out.cols == out_,
          weight_.name + ": backward shape mismatch");
  kernels::gemm_tn(out_, in_, x.rows, grad_out.data, x.data, weight_.grad_sink(), true);
  auto bias_grad = bias_.grad_sink();
  for (std::size_t i = 0; i < grad_out.rows; ++i) {
    const auto g = grad_out.row(i);
    for (std::size_t j = 0; j < out_; ++j) bias_grad[j] += g[j];
  }
  Matrix grad_in;
  if (input_grad) {
    grad_in = Matrix(x.rows, in_);
    kernels::gemm_nn(x.rows, in_, out_, grad_out.data, weight_.value, grad_in.data, false);
  }
  return grad_in;
}

}  // namespace ssd::model

#include "rscnet/numerics/optim.hpp"

#include <cmath>
#include <numbers>

namespace rscnet {

template <typename T>
void OptimizerState<T>::reset(std::span<const Tensor<T>> params, bool adaptive) {
  velocity.clear();
  second.clear();
  velocity.reserve(params.size());
  for (const auto& p : params) velocity.emplace_back(p.shape());
  if (adaptive) second = velocity;
}

namespace {

template <typename T>
void check_buffers(const char* op, const std::vector<Array<T>>& buffers, std::span<Tensor<T>> params) {
  check_shape(buffers.size() == params.size(),
              fmt::format("{}: {} state buffers for {} parameters", op, buffers.size(), params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_shape(buffers[i].shape() == params[i].shape(),
                fmt::format("{}: state buffer {} does not mirror parameter {} of shape {}", op,
                            shape_str(buffers[i].shape()), i, shape_str(params[i].shape())));
  }
}

template <typename T>
void check_gradients(const char* op, std::span<Tensor<T>> params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].has_grad() && !all_finite<T>(params[i].grad().values())) {
      throw NumericError(fmt::format("{}: non-finite gradient for parameter {}", op, i));
    }
  }
}

}  // namespace

template <typename T>
void sgd_step(OptimizerState<T>& state, std::span<Tensor<T>> params) {
  check_buffers("sgd_step", state.velocity, params);
  check_gradients("sgd_step", params);
  const T lr = state.learning_rate, mu = state.momentum, wd = state.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].mutable_value();
    auto& v = state.velocity[i];
    const bool has_grad = params[i].has_grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const T g = has_grad ? params[i].grad()[k] : T(0);
      v[k] = mu * v[k] + (g + wd * w[k]);
      w[k] -= lr * v[k];
    }
  }
  ++state.step_index;
}

template <typename T>
void adam_step(OptimizerState<T>& state, std::span<Tensor<T>> params) {
  check_buffers("adam_step", state.velocity, params);
  check_buffers("adam_step", state.second, params);
  check_gradients("adam_step", params);
  const T lr = state.learning_rate, mu = state.momentum, b2 = state.beta2, eps = state.epsilon, wd = state.weight_decay;
  const double t = static_cast<double>(state.step_index + 1);
  const T c1 = static_cast<T>(1.0 - std::pow(static_cast<double>(mu), t));
  const T c2 = static_cast<T>(1.0 - std::pow(static_cast<double>(b2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].mutable_value();
    auto& v = state.velocity[i];
    auto& s = state.second[i];
    const bool has_grad = params[i].has_grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const T g = (has_grad ? params[i].grad()[k] : T(0)) + wd * w[k];
      v[k] = mu * v[k] + (T(1) - mu) * g;
      s[k] = b2 * s[k] + (T(1) - b2) * g * g;
      w[k] -= lr * (v[k] / c1) / (std::sqrt(s[k] / c2) + eps);
    }
  }
  ++state.step_index;
}

double cosine_lr(std::size_t step, std::size_t total, double lr0) {
  if (total == 0) throw ConfigError("cosine_lr: total steps must be positive");
  check_config(step <= total, fmt::format("cosine_lr: step {} beyond total {}", step, total));
  const double lr = 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
  return lr > 0.0 ? lr : 0.0;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void sgd_step(OptimizerState<float>&, std::span<Tensor<float>>);
template void sgd_step(OptimizerState<double>&, std::span<Tensor<double>>);
template void adam_step(OptimizerState<float>&, std::span<Tensor<float>>);
template void adam_step(OptimizerState<double>&, std::span<Tensor<double>>);

}  // namespace rscnet

#include "rscnet/model/layers.hpp"

#include <cmath>

namespace rscnet::model {

template <typename T>
Conv2d<T>::Conv2d(ops::ConvSpec spec, bool with_bias, Initializer& init) : spec_(spec) {
  const double bound = std::sqrt(1.0 / static_cast<double>(spec.in_channels * spec.kernel_h * spec.kernel_w));
  weight = Tensor<T>::leaf(init.uniform<T>(spec.weight_shape(), bound), true);
  if (with_bias) bias = Tensor<T>::leaf(init.uniform<T>({spec.out_channels}, bound), true);
}

template <typename T>
void Conv2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& v) {
  v.param(prefix + ".weight", weight);
  if (bias.defined()) v.param(prefix + ".bias", bias);
}

template <typename T>
ConvBnAct<T>::ConvBnAct(ops::ConvSpec spec, Initializer& init)
    : conv(spec, false, init),
      gamma(Tensor<T>::leaf(Array<T>({spec.out_channels}, T(1)), true)),
      beta(Tensor<T>::leaf(Array<T>({spec.out_channels}, T(0)), true)),
      slope(Tensor<T>::leaf(Array<T>({spec.out_channels}, T(0.25)), true)),
      norm(spec.out_channels) {}

template <typename T>
Tensor<T> ConvBnAct<T>::forward(const Tensor<T>& x, bool training) const {
  return ops::prelu(ops::batch_norm(conv.forward(x), gamma, beta, norm, training), slope);
}

template <typename T>
void ConvBnAct<T>::visit(const std::string& prefix, const ParamVisitor<T>& v) {
  conv.visit(prefix + ".conv", v);
  v.param(prefix + ".bn.gamma", gamma);
  v.param(prefix + ".bn.beta", beta);
  v.param(prefix + ".prelu", slope);
  v.buffer(prefix + ".bn.running_mean", norm.running_mean);
  v.buffer(prefix + ".bn.running_var", norm.running_var);
}

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, Initializer& init) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  weight = Tensor<T>::leaf(init.uniform<T>({out, in}, bound), true);
  bias = Tensor<T>::leaf(init.uniform<T>({out}, bound), true);
}

template <typename T>
void Linear<T>::visit(const std::string& prefix, const ParamVisitor<T>& v) {
  v.param(prefix + ".weight", weight);
  v.param(prefix + ".bias", bias);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvBnAct<float>;
template class ConvBnAct<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace rscnet::model

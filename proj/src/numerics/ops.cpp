#include "rscnet/numerics/ops.hpp"

#include <cmath>

#include "kernels.hpp"

namespace rscnet::ops {
namespace {

template <typename T>
Node<T>& parent(Node<T>& n, std::size_t i) {
  return *n.parents[i];
}

template <typename T>
bool wants_grad(const Node<T>& n, std::size_t i) {
  return n.parents[i] && n.parents[i]->requires_grad;
}

std::size_t product(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t p = 1;
  for (std::size_t i = from; i < to; ++i) p *= s[i];
  return p;
}

template <typename T>
Tensor<T> unary(const char* name, const Tensor<T>& x, T (*f)(T), T (*df_from_y)(T, T)) {
  Array<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(name, std::move(out), {x}, [df_from_y](Node<T>& n) {
    auto& p = parent(n, 0);
    for (std::size_t i = 0; i < n.value.size(); ++i) p.grad[i] += n.grad[i] * df_from_y(p.value[i], n.value[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvSpec& spec, const Tensor<T>& weights, const Tensor<T>& bias) {
  check_shape(input.rank() == 3 || input.rank() == 4,
              fmt::format("conv2d: input must be [C,H,W] or [B,C,H,W], got {}", shape_str(input.shape())));
  check_shape(spec.kernel_h >= 1 && spec.kernel_w >= 1 && spec.dilation >= 1, "conv2d: kernel and dilation must be >= 1");
  const bool batched = input.rank() == 4;
  const std::size_t B = batched ? input.dim(0) : 1;
  const std::size_t C = input.dim(batched ? 1 : 0);
  const std::size_t H = input.dim(batched ? 2 : 1);
  const std::size_t W = input.dim(batched ? 3 : 2);
  const std::size_t O = spec.out_channels;
  check_shape(C == spec.in_channels,
              fmt::format("conv2d: input has {} channels, spec expects {}", C, spec.in_channels));
  check_shape(weights.shape() == spec.weight_shape(),
              fmt::format("conv2d: weights {} do not match spec {}", shape_str(weights.shape()),
                          shape_str(spec.weight_shape())));
  if (bias.defined()) {
    check_shape(bias.shape() == Shape{O}, fmt::format("conv2d: bias {} for {} outputs", shape_str(bias.shape()), O));
  }

  const std::size_t kh = spec.kernel_h, kw = spec.kernel_w, d = spec.dilation;
  const std::size_t eh = spec.effective_h(), ew = spec.effective_w();
  const std::size_t Hp = H + eh - 1, Wp = W + ew - 1;
  check_shape(eh <= Hp && ew <= Wp, "conv2d: effective kernel exceeds padded input");
  const std::size_t ptop = spec.pad_top(), pleft = spec.pad_left();
  // Padded planes are scanned as one contiguous run of H*Wp outputs; columns
  // j >= W of that run wrap around and are discarded. Work proceeds in tiles
  // of kTile outputs held in registers; the slack keeps the last tile of the
  // last taps in bounds.
  using Tile = kernels::Tile<T>;
  constexpr std::size_t kTile = Tile::size();
  const std::size_t plane = Hp * Wp + ew + kTile;
  const std::size_t run = H * Wp;
  const std::size_t taps = kh * kw;
  std::vector<std::size_t> tap_offset(taps);
  for (std::size_t m = 0; m < kh; ++m) {
    for (std::size_t n = 0; n < kw; ++n) tap_offset[m * kw + n] = m * d * Wp + n * d;
  }

  auto pad_sample = [=](const T* x, std::vector<T>& buf) {
    buf.assign(C * plane, T(0));
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < H; ++i) {
        const T* src = x + (c * H + i) * W;
        std::copy(src, src + W, buf.begin() + c * plane + (i + ptop) * Wp + pleft);
      }
    }
  };

  Shape out_shape = batched ? Shape{B, O, H, W} : Shape{O, H, W};
  Array<T> out(out_shape);
  {
    const T* x = input.value().data();
    const T* w = weights.value().data();
    std::vector<T> padded, row(run + kTile);
    for (std::size_t b = 0; b < B; ++b) {
      pad_sample(x + b * C * H * W, padded);
      for (std::size_t o = 0; o < O; ++o) {
        const T* wo = w + o * C * taps;
        for (std::size_t k0 = 0; k0 < run; k0 += kTile) {
          Tile tile;
          for (std::size_t c = 0; c < C; ++c) {
            const T* pc = padded.data() + c * plane + k0;
            for (std::size_t t = 0; t < taps; ++t) tile.fma(wo[c * taps + t], pc + tap_offset[t]);
          }
          tile.store(row.data() + k0);
        }
        const T bo = bias.defined() ? bias.value()[o] : T(0);
        T* dst = out.data() + (b * O + o) * H * W;
        for (std::size_t i = 0; i < H; ++i) {
          for (std::size_t j = 0; j < W; ++j) dst[i * W + j] = row[i * Wp + j] + bo;
        }
      }
    }
  }

  return make_result<T>("conv2d", std::move(out), {input, weights, bias}, [=](Node<T>& n) {
    const bool gx = wants_grad(n, 0), gw = wants_grad(n, 1), gb = n.parents[2] && wants_grad(n, 2);
    const T* x = parent(n, 0).value.data();
    const T* w = parent(n, 1).value.data();
    const T* dy = n.grad.data();
    // Output grads on the padded-width grid (wrap columns zeroed), with a
    // leading margin so the transposed taps never index below zero.
    const std::size_t lead = tap_offset.back();
    const std::size_t span = lead + Hp * Wp + kTile;
    std::vector<T> padded, dys(O * span), dplane(Hp * Wp + kTile);
    for (std::size_t b = 0; b < B; ++b) {
      std::fill(dys.begin(), dys.end(), T(0));
      for (std::size_t o = 0; o < O; ++o) {
        const T* dyo = dy + (b * O + o) * H * W;
        for (std::size_t i = 0; i < H; ++i) std::copy(dyo + i * W, dyo + (i + 1) * W, dys.begin() + o * span + lead + i * Wp);
        if (gb) parent(n, 2).grad[o] += kernels::sum(dyo, H * W);
      }
      if (gw) {
        pad_sample(x + b * C * H * W, padded);
        T* dw = parent(n, 1).grad.data();
        for (std::size_t o = 0; o < O; ++o) {
          const T* dyo = dys.data() + o * span + lead;
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < taps; ++t) {
              dw[(o * C + c) * taps + t] += kernels::dot(dyo, padded.data() + c * plane + tap_offset[t], run);
            }
          }
        }
      }
      if (gx) {
        T* dx = parent(n, 0).grad.data() + b * C * H * W;
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t q0 = 0; q0 < Hp * Wp; q0 += kTile) {
            Tile tile;
            for (std::size_t o = 0; o < O; ++o) {
              const T* wo = w + (o * C + c) * taps;
              const T* dyo = dys.data() + o * span + lead + q0;
              for (std::size_t t = 0; t < taps; ++t) tile.fma(wo[t], dyo - tap_offset[t]);
            }
            tile.store(dplane.data() + q0);
          }
          for (std::size_t i = 0; i < H; ++i) {
            const T* src = dplane.data() + (i + ptop) * Wp + pleft;
            for (std::size_t j = 0; j < W; ++j) dx[(c * H + i) * W + j] += src[j];
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Dense

namespace {
// Reduction-axis block for the dense layer: keeps a block of every input row
// cache-resident while all outputs consume it.
constexpr std::size_t kDenseBlock = 1024;
}  // namespace

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  check_shape(x.rank() >= 1 && weights.rank() == 2, "linear: x must have rank >= 1 and weights rank 2");
  const std::size_t din = x.shape().back();
  const std::size_t dout = weights.dim(0);
  check_shape(weights.dim(1) == din, fmt::format("linear: input width {} does not match weights {}", din,
                                                 shape_str(weights.shape())));
  if (bias.defined()) check_shape(bias.shape() == Shape{dout}, "linear: bias must be [D_out]");
  const std::size_t rows = x.numel() / din;
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  Array<T> out(out_shape);
  const T* xv = x.value().data();
  const T* w = weights.value().data();
  // Per output: block partial dots summed in block order, then the bias.
  for (std::size_t k0 = 0; k0 < din; k0 += kDenseBlock) {
    const std::size_t len = std::min(kDenseBlock, din - k0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < dout; ++o) out[r * dout + o] += kernels::dot(xv + r * din + k0, w + o * din + k0, len);
    }
  }
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < dout; ++o) out[r * dout + o] += bias.value()[o];
    }
  }
  return make_result<T>("linear", std::move(out), {x, weights, bias}, [=](Node<T>& n) {
    const T* xv = parent(n, 0).value.data();
    const T* w = parent(n, 1).value.data();
    const T* dy = n.grad.data();
    const bool gx = wants_grad(n, 0), gw = wants_grad(n, 1);
    for (std::size_t k0 = 0; k0 < din; k0 += kDenseBlock) {
      const std::size_t len = std::min(kDenseBlock, din - k0);
      if (gx) {
        T* dx = parent(n, 0).grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < dout; ++o) kernels::axpy(dy[r * dout + o], w + o * din + k0, dx + r * din + k0, len);
        }
      }
      if (gw) {
        T* dw = parent(n, 1).grad.data();
        for (std::size_t o = 0; o < dout; ++o) {
          for (std::size_t r = 0; r < rows; ++r) kernels::axpy(dy[r * dout + o], xv + r * din + k0, dw + o * din + k0, len);
        }
      }
    }
    if (n.parents[2] && wants_grad(n, 2)) {
      T* db = parent(n, 2).grad.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < dout; ++o) db[o] += dy[r * dout + o];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and activations

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& state,
                     bool training) {
  check_shape(x.rank() >= 2, "batch_norm: input needs a channel axis");
  const std::size_t B = x.dim(0), C = x.dim(1), inner = product(x.shape(), 2, x.rank());
  check_shape(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "batch_norm: gamma/beta must be [C]");
  check_shape(state.running_mean.shape() == Shape{C}, "batch_norm: running stats must be [C]");
  const std::size_t count = B * inner;
  const T* xv = x.value().data();

  std::vector<T> mu(C), inv_std(C);
  if (training) {
    std::vector<T> centered(inner);
    for (std::size_t c = 0; c < C; ++c) {
      T s = 0;
      for (std::size_t b = 0; b < B; ++b) s += kernels::sum(xv + (b * C + c) * inner, inner);
      const T m = s / T(count);
      T v = 0;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = xv + (b * C + c) * inner;
        for (std::size_t k = 0; k < inner; ++k) centered[k] = p[k] - m;
        v += kernels::dot(centered.data(), centered.data(), inner);
      }
      const T var = v / T(count);
      mu[c] = m;
      inv_std[c] = T(1) / std::sqrt(var + state.eps);
      const T unbiased = count > 1 ? v / T(count - 1) : var;
      state.running_mean[c] = (T(1) - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] = (T(1) - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = state.running_mean[c];
      inv_std[c] = T(1) / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  // xhat is kept for the backward pass.
  Array<T> xhat(x.shape());
  Array<T> out(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * inner;
      const T m = mu[c], is = inv_std[c], g = gamma.value()[c], bt = beta.value()[c];
      for (std::size_t k = 0; k < inner; ++k) {
        const T h = (xv[base + k] - m) * is;
        xhat[base + k] = h;
        out[base + k] = g * h + bt;
      }
    }
  }

  return make_result<T>("batch_norm", std::move(out), {x, gamma, beta},
                        [=, xhat = std::move(xhat)](Node<T>& n) {
    const T* dy = n.grad.data();
    const bool gx = wants_grad(n, 0);
    for (std::size_t c = 0; c < C; ++c) {
      T sum_dy = 0, sum_dy_xhat = 0;
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t base = (b * C + c) * inner;
        sum_dy += kernels::sum(dy + base, inner);
        sum_dy_xhat += kernels::dot(dy + base, xhat.data() + base, inner);
      }
      if (wants_grad(n, 1)) parent(n, 1).grad[c] += sum_dy_xhat;
      if (wants_grad(n, 2)) parent(n, 2).grad[c] += sum_dy;
      if (!gx) continue;
      T* dx = parent(n, 0).grad.data();
      const T scale_c = parent(n, 1).value[c] * inv_std[c];
      const T mean_dy = sum_dy / T(count), mean_dy_xhat = sum_dy_xhat / T(count);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t base = (b * C + c) * inner;
        if (training) {
          for (std::size_t k = 0; k < inner; ++k) {
            dx[base + k] += scale_c * (dy[base + k] - mean_dy - xhat[base + k] * mean_dy_xhat);
          }
        } else {
          for (std::size_t k = 0; k < inner; ++k) dx[base + k] += scale_c * dy[base + k];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  check_shape(x.rank() >= 2, "prelu: input needs a channel axis");
  const std::size_t B = x.dim(0), C = x.dim(1), inner = product(x.shape(), 2, x.rank());
  check_shape(slope.shape() == Shape{C}, "prelu: slope must be [C]");
  Array<T> out(x.shape());
  const T* xv = x.value().data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T a = slope.value()[c];
      const std::size_t base = (b * C + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        const T v = xv[base + k];
        out[base + k] = v > T(0) ? v : a * v;
      }
    }
  }
  return make_result<T>("prelu", std::move(out), {x, slope}, [=](Node<T>& n) {
    const T* xv = parent(n, 0).value.data();
    const T* a = parent(n, 1).value.data();
    const T* dy = n.grad.data();
    const bool gx = wants_grad(n, 0), ga = wants_grad(n, 1);
    std::vector<T> negative_part(inner);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t base = (b * C + c) * inner;
        if (gx) {
          T* dx = parent(n, 0).grad.data() + base;
          for (std::size_t k = 0; k < inner; ++k) dx[k] += xv[base + k] > T(0) ? dy[base + k] : a[c] * dy[base + k];
        }
        if (ga) {
          for (std::size_t k = 0; k < inner; ++k) negative_part[k] = xv[base + k] > T(0) ? T(0) : xv[base + k];
          parent(n, 1).grad[c] += kernels::dot(negative_part.data(), dy + base, inner);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x, +[](T v) { return v > T(0) ? v : T(0); }, +[](T xv, T) { return xv > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x, +[](T v) { return T(1) / (T(1) + std::exp(-v)); }, +[](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>(
      "tanh", x, +[](T v) { return std::tanh(v); }, +[](T, T y) { return T(1) - y * y; });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic and reductions

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_shape(a.shape() == b.shape(),
              fmt::format("add: shape mismatch {} vs {}", shape_str(a.shape()), shape_str(b.shape())));
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>("add", std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants_grad(n, p)) continue;
      for (std::size_t i = 0; i < n.grad.size(); ++i) parent(n, p).grad[i] += n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_shape(a.shape() == b.shape(),
              fmt::format("sub: shape mismatch {} vs {}", shape_str(a.shape()), shape_str(b.shape())));
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>("sub", std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (wants_grad(n, 0)) parent(n, 0).grad[i] += n.grad[i];
      if (wants_grad(n, 1)) parent(n, 1).grad[i] -= n.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_shape(a.shape() == b.shape(),
              fmt::format("mul: shape mismatch {} vs {}", shape_str(a.shape()), shape_str(b.shape())));
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>("mul", std::move(out), {a, b}, [](Node<T>& n) {
    auto& pa = parent(n, 0);
    auto& pb = parent(n, 1);
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (wants_grad(n, 0)) pa.grad[i] += n.grad[i] * pb.value[i];
      if (wants_grad(n, 1)) pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Array<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return make_result<T>("scale", std::move(out), {a}, [factor](Node<T>& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) parent(n, 0).grad[i] += n.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Array<T> out(Shape{1}, kernels::sum(x.value().data(), x.numel()));
  return make_result<T>("sum", std::move(out), {x}, [](Node<T>& n) {
    for (auto& g : parent(n, 0).grad.storage()) g += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.numel()));
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  return make_result<T>("reshape", x.value().reshaped(std::move(shape)), {x}, [](Node<T>& n) {
    auto& g = parent(n, 0).grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  check_shape(!parts.empty(), "concat: no inputs");
  const Shape& first = parts.front().shape();
  check_shape(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    check_shape(p.rank() == first.size(), "concat: rank mismatch");
    for (std::size_t a = 0; a < first.size(); ++a) {
      if (a != axis) check_shape(p.dim(a) == first[a], fmt::format("concat: extent mismatch on axis {}", a));
    }
    out_shape[axis] += p.dim(axis);
  }
  const std::size_t outer = product(first, 0, axis), inner = product(first, axis + 1, first.size());
  const std::size_t out_row = out_shape[axis] * inner;
  Array<T> out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t chunk = p.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.value().data() + o * chunk, chunk, out.data() + o * out_row + off);
    }
    off += chunk;
  }
  return make_result<T>("concat", std::move(out), parts, [=](Node<T>& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      if (!wants_grad(n, i)) continue;
      auto& g = parent(n, i).grad;
      const std::size_t chunk = g.size() / outer;
      for (std::size_t o = 0; o < outer; ++o) {
        const T* src = n.grad.data() + o * out_row + offsets[i];
        for (std::size_t k = 0; k < chunk; ++k) g[o * chunk + k] += src[k];
      }
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  check_shape(axis < x.rank(), "slice: axis out of range");
  check_shape(length >= 1 && start + length <= x.dim(axis),
              fmt::format("slice: [{}, {}) outside extent {}", start, start + length, x.dim(axis)));
  const std::size_t outer = product(x.shape(), 0, axis), inner = product(x.shape(), axis + 1, x.rank());
  const std::size_t in_row = x.dim(axis) * inner, chunk = length * inner, first = start * inner;
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Array<T> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.value().data() + o * in_row + first, chunk, out.data() + o * chunk);
  }
  return make_result<T>("slice", std::move(out), {x}, [=](Node<T>& n) {
    auto& g = parent(n, 0).grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t k = 0; k < chunk; ++k) g[o * in_row + first + k] += n.grad[o * chunk + k];
    }
  });
}

namespace {

// Index map shared by split/merge: element (b, r, s*F + f) of a [B, R, S*F]
// view corresponds to element (b*S + s, r, f) of the [B*S, R, F] view.
template <typename T>
void window_permute(const T* src, T* dst, std::size_t B, std::size_t R, std::size_t S, std::size_t F, bool split,
                    bool accumulate) {
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t joined = (b * R + r) * S * F + s * F;
        const std::size_t windowed = ((b * S + s) * R + r) * F;
        const T* from = src + (split ? joined : windowed);
        T* to = dst + (split ? windowed : joined);
        for (std::size_t f = 0; f < F; ++f) to[f] = accumulate ? to[f] + from[f] : from[f];
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> split_windows(const Tensor<T>& x, std::size_t frames_per_window) {
  check_shape(x.rank() >= 2, "split_windows: need [B, ..., N_t]");
  const std::size_t nt = x.shape().back();
  check_shape(frames_per_window >= 1 && nt % frames_per_window == 0,
              fmt::format("split_windows: {} frames do not divide into windows of {}", nt, frames_per_window));
  const std::size_t B = x.dim(0), S = nt / frames_per_window, R = product(x.shape(), 1, x.rank() - 1);
  Shape out_shape = x.shape();
  out_shape[0] = B * S;
  out_shape.back() = frames_per_window;
  Array<T> out(out_shape);
  window_permute(x.value().data(), out.data(), B, R, S, frames_per_window, true, false);
  return make_result<T>("split_windows", std::move(out), {x}, [=](Node<T>& n) {
    window_permute(n.grad.data(), parent(n, 0).grad.data(), B, R, S, frames_per_window, false, true);
  });
}

template <typename T>
Tensor<T> merge_windows(const Tensor<T>& windows, std::size_t windows_per_sample) {
  check_shape(windows.rank() >= 2, "merge_windows: need [B*S, ..., N_f]");
  const std::size_t S = windows_per_sample;
  check_shape(S >= 1 && windows.dim(0) % S == 0,
              fmt::format("merge_windows: {} windows are not a multiple of {}", windows.dim(0), S));
  const std::size_t B = windows.dim(0) / S, F = windows.shape().back(), R = product(windows.shape(), 1, windows.rank() - 1);
  Shape out_shape = windows.shape();
  out_shape[0] = B;
  out_shape.back() = S * F;
  Array<T> out(out_shape);
  window_permute(windows.value().data(), out.data(), B, R, S, F, false, false);
  return make_result<T>("merge_windows", std::move(out), {windows}, [=](Node<T>& n) {
    window_permute(n.grad.data(), parent(n, 0).grad.data(), B, R, S, F, true, true);
  });
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T mx = *std::max_element(logits.begin(), logits.end());
  T total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  const std::size_t C = logits.shape().back(), rows = logits.numel() / C;
  Array<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    auto p = softmax<T>(std::span<const T>(logits.value().data() + r * C, C));
    std::copy(p.begin(), p.end(), out.data() + r * C);
  }
  return make_result<T>("softmax", std::move(out), {logits}, [=](Node<T>& n) {
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = n.value.data() + r * C;
      const T* g = n.grad.data() + r * C;
      T inner = 0;
      for (std::size_t k = 0; k < C; ++k) inner += g[k] * y[k];
      for (std::size_t k = 0; k < C; ++k) parent(n, 0).grad[r * C + k] += y[k] * (g[k] - inner);
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  check_shape(logits.rank() == 1 || logits.rank() == 2, "cross_entropy: logits must be [C] or [B,C]");
  const std::size_t C = logits.shape().back(), B = logits.numel() / C;
  check_shape(labels.size() == B, fmt::format("cross_entropy: {} labels for batch of {}", labels.size(), B));
  std::vector<int> lab(labels.begin(), labels.end());
  for (int y : lab) {
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw Error(fmt::format("cross_entropy: label {} outside [0, {})", y, C));
    }
  }
  Array<T> probs(Shape{B, C});
  T total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const T* z = logits.value().data() + b * C;
    const T mx = *std::max_element(z, z + C);
    T s = 0;
    for (std::size_t k = 0; k < C; ++k) s += std::exp(z[k] - mx);
    const T log_z = mx + std::log(s);
    total += log_z - z[lab[b]];
    for (std::size_t k = 0; k < C; ++k) probs[b * C + k] = std::exp(z[k] - log_z);
  }
  Array<T> out(Shape{1}, total / T(B));
  return make_result<T>("cross_entropy", std::move(out), {logits}, [=](Node<T>& n) {
    const T g = n.grad[0] / T(B);
    auto& dz = parent(n, 0).grad;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t k = 0; k < C; ++k) {
        dz[b * C + k] += g * (probs[b * C + k] - (static_cast<std::size_t>(lab[b]) == k ? T(1) : T(0)));
      }
    }
  });
}

template <typename T>
Tensor<T> mse(const Tensor<T>& prediction, const Tensor<T>& target) {
  check_shape(prediction.shape() == target.shape(), fmt::format("mse: shape mismatch {} vs {}",
                                                                shape_str(prediction.shape()),
                                                                shape_str(target.shape())));
  const std::size_t N = prediction.numel();
  const T* p = prediction.value().data();
  const T* t = target.value().data();
  T lane[8] = {};
  std::size_t k = 0;
  for (; k + 8 <= N; k += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += (p[k + l] - t[k + l]) * (p[k + l] - t[k + l]);
  }
  T tail = 0;
  for (; k < N; ++k) tail += (p[k] - t[k]) * (p[k] - t[k]);
  const T total = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
  Array<T> out(Shape{1}, total / T(N));
  return make_result<T>("mse", std::move(out), {prediction, target}, [N](Node<T>& n) {
    const T g = T(2) * n.grad[0] / T(N);
    auto& pp = parent(n, 0);
    auto& pt = parent(n, 1);
    for (std::size_t i = 0; i < N; ++i) {
      const T diff = pp.value[i] - pt.value[i];
      if (wants_grad(n, 0)) pp.grad[i] += g * diff;
      if (wants_grad(n, 1)) pt.grad[i] -= g * diff;
    }
  });
}

// ---------------------------------------------------------------------------
// Recurrent cell

template <typename T>
LstmState<T> lstm_cell(const Tensor<T>& x, const LstmState<T>& state, const LstmParams<T>& params) {
  const bool batched = x.rank() == 2;
  check_shape(x.rank() == 1 || batched, "lstm_cell: x must be [D] or [B,D]");
  check_shape(state.h.shape() == state.c.shape(), "lstm_cell: h and c shapes differ");
  check_shape(state.h.rank() == x.rank(), "lstm_cell: state rank differs from input rank");
  const std::size_t N = state.h.shape().back(), D = x.shape().back();
  if (batched) check_shape(state.h.dim(0) == x.dim(0), "lstm_cell: batch mismatch between x and state");
  check_shape(params.weights.shape() == Shape{4 * N, D + N},
              fmt::format("lstm_cell: weights {} for D_in={} N={}", shape_str(params.weights.shape()), D, N));
  check_shape(params.bias.shape() == Shape{4 * N}, "lstm_cell: bias must be [4N]");

  const std::size_t axis = x.rank() - 1;
  auto z = linear(concat<T>({x, state.h}, axis), params.weights, params.bias);
  auto in_gate = sigmoid(slice(z, axis, 0, N));
  auto forget_gate = sigmoid(slice(z, axis, N, N));
  auto candidate = tanh(slice(z, axis, 2 * N, N));
  auto out_gate = sigmoid(slice(z, axis, 3 * N, N));
  auto c = add(mul(forget_gate, state.c), mul(in_gate, candidate));
  auto h = mul(out_gate, tanh(c));
  return {h, c};
}

#define RSCNET_INSTANTIATE(T)                                                                                     \
  template Tensor<T> conv2d(const Tensor<T>&, const ConvSpec&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, BatchNormState<T>&, bool);  \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);                                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                   \
  template Tensor<T> tanh(const Tensor<T>&);                                                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                            \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                                          \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                              \
  template Tensor<T> split_windows(const Tensor<T>&, std::size_t);                                                \
  template Tensor<T> merge_windows(const Tensor<T>&, std::size_t);                                                \
  template std::vector<T> softmax(std::span<const T>);                                                            \
  template Tensor<T> softmax(const Tensor<T>&);                                                                   \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);                                       \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&);                                                     \
  template LstmState<T> lstm_cell(const Tensor<T>&, const LstmState<T>&, const LstmParams<T>&);

RSCNET_INSTANTIATE(float)
RSCNET_INSTANTIATE(double)

#undef RSCNET_INSTANTIATE

}  // namespace rscnet::ops

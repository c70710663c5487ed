#pragma once

#include <cmath>

#include "fracgen/nn/tensor.hpp"

namespace fracgen::nn {

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ConfigError("add: size mismatch");
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node, bn = b.node;
  return make_result<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ConfigError("sub: size mismatch");
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto an = a.node, bn = b.node;
  return make_result<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ConfigError("mul: size mismatch");
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node, bn = b.node;
  return make_result<T>(a.shape(), std::move(out), {a, b}, [an, bn](Node<T>& self) {
    if (an->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->values[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->values[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  auto an = a.node;
  return make_result<T>(a.shape(), std::move(out), {a}, [an, c](Node<T>& self) {
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
  });
}

// ---- activations ----

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
  auto an = a.node;
  return make_result<T>(a.shape(), std::move(out), {a}, [an](Node<T>& self) {
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (an->values[i] > T(0)) an->grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] > T(0) ? a.values()[i] : slope * a.values()[i];
  auto an = a.node;
  return make_result<T>(a.shape(), std::move(out), {a}, [an, slope](Node<T>& self) {
    for (size_t i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * (an->values[i] > T(0) ? T(1) : slope);
  });
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  auto an = a.node;
  return make_result<T>(a.shape(), std::move(out), {a}, [an](Node<T>& self) {
    for (size_t i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * (T(1) - self.values[i] * self.values[i]);
  });
}

template <typename T>
Tensor<T> sine(const Tensor<T>& a, T omega) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::sin(omega * a.values()[i]);
  auto an = a.node;
  return make_result<T>(a.shape(), std::move(out), {a}, [an, omega](Node<T>& self) {
    for (size_t i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * omega * std::cos(omega * an->values[i]);
  });
}

// ---- reductions ----

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.values()) total += v;
  auto an = a.node;
  return make_result<T>({1}, {total}, {a}, [an](Node<T>& self) {
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.values()) total += v;
  const T inv = T(1) / static_cast<T>(a.size());
  auto an = a.node;
  return make_result<T>({1}, {total * inv}, {a}, [an, inv](Node<T>& self) {
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0] * inv;
  });
}

/// mean((a-b)^2)
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> d = sub(a, b);
  return mean(mul(d, d));
}

// ---- shape plumbing ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, std::vector<int> shape) {
  if (numel(shape) != a.size()) throw ConfigError("reshape: size mismatch");
  auto an = a.node;
  return make_result<T>(std::move(shape), a.values(), {a}, [an](Node<T>& self) {
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

/// Concatenate flat contents as a single row vector [1, |a|+|b|].
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  std::vector<T> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  auto an = a.node, bn = b.node;
  const size_t na = a.size();
  return make_result<T>({1, static_cast<int>(out.size())}, std::move(out), {a, b},
                        [an, bn, na](Node<T>& self) {
                          if (an->requires_grad)
                            for (size_t i = 0; i < na; ++i) an->grad[i] += self.grad[i];
                          if (bn->requires_grad)
                            for (size_t i = na; i < self.grad.size(); ++i)
                              bn->grad[i - na] += self.grad[i];
                        });
}

// ---- dense ----

/// y = W x + b with W [m,n], x flattened to n, b [m]; output [1,m].
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.shape().size() != 2) throw ConfigError("dense: weight must be rank 2");
  const int m = w.shape()[0], n = w.shape()[1];
  if (static_cast<size_t>(n) != x.size() || static_cast<size_t>(m) != b.size())
    throw ConfigError("dense: size mismatch");

  std::vector<T> out(m);
  for (int i = 0; i < m; ++i) {
    T acc = b.values()[i];
    const T* row = w.values().data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += row[j] * x.values()[j];
    out[i] = acc;
  }
  auto xn = x.node, wn = w.node, bn = b.node;
  return make_result<T>({1, m}, std::move(out), {x, w, b}, [xn, wn, bn, m, n](Node<T>& self) {
    for (int i = 0; i < m; ++i) {
      const T g = self.grad[i];
      if (g == T(0)) continue;
      const T* row = wn->values.data() + static_cast<size_t>(i) * n;
      if (bn->requires_grad) bn->grad[i] += g;
      if (xn->requires_grad)
        for (int j = 0; j < n; ++j) xn->grad[j] += g * row[j];
      if (wn->requires_grad) {
        T* wrow = wn->grad.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) wrow[j] += g * xn->values[j];
      }
    }
  });
}

// ---- 3d convolutions ----
// Tensors are [1, C, D, H, W]; conv weights [OC, IC, k, k, k]; transposed
// weights [IC, OC, k, k, k]. With shared storage the two are adjoint maps.

namespace detail {

struct ConvDims {
  int ic, d, h, w;      // input
  int oc, od, oh, ow;   // output
  int k, stride, pad;
};

inline void check_rank5(const std::vector<int>& s, const char* what) {
  if (s.size() != 5 || s[0] != 1) throw ConfigError(std::string(what) + ": expected [1,C,D,H,W]");
}

}  // namespace detail

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                 int pad) {
  detail::check_rank5(x.shape(), "conv3d input");
  if (w.shape().size() != 5) throw ConfigError("conv3d: weight must be rank 5");
  detail::ConvDims dm;
  dm.ic = x.shape()[1];
  dm.d = x.shape()[2];
  dm.h = x.shape()[3];
  dm.w = x.shape()[4];
  dm.oc = w.shape()[0];
  dm.k = w.shape()[2];
  dm.stride = stride;
  dm.pad = pad;
  if (w.shape()[1] != dm.ic || w.shape()[3] != dm.k || w.shape()[4] != dm.k)
    throw ConfigError("conv3d: weight shape mismatch");
  if (b.size() != static_cast<size_t>(dm.oc)) throw ConfigError("conv3d: bias size mismatch");
  dm.od = (dm.d + 2 * pad - dm.k) / stride + 1;
  dm.oh = (dm.h + 2 * pad - dm.k) / stride + 1;
  dm.ow = (dm.w + 2 * pad - dm.k) / stride + 1;
  if (dm.od < 1 || dm.oh < 1 || dm.ow < 1) throw ConfigError("conv3d: output would be empty");

  std::vector<T> out(static_cast<size_t>(dm.oc) * dm.od * dm.oh * dm.ow);
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  const int k = dm.k;
  for (int oc = 0; oc < dm.oc; ++oc)
    for (int od = 0; od < dm.od; ++od)
      for (int oh = 0; oh < dm.oh; ++oh)
        for (int ow = 0; ow < dm.ow; ++ow) {
          T acc = b.values()[oc];
          for (int ic = 0; ic < dm.ic; ++ic)
            for (int kd = 0; kd < k; ++kd) {
              const int id = od * stride - pad + kd;
              if (id < 0 || id >= dm.d) continue;
              for (int kh = 0; kh < k; ++kh) {
                const int ih = oh * stride - pad + kh;
                if (ih < 0 || ih >= dm.h) continue;
                for (int kw = 0; kw < k; ++kw) {
                  const int iw = ow * stride - pad + kw;
                  if (iw < 0 || iw >= dm.w) continue;
                  acc += xv[((static_cast<size_t>(ic) * dm.d + id) * dm.h + ih) * dm.w + iw] *
                         wv[(((static_cast<size_t>(oc) * dm.ic + ic) * k + kd) * k + kh) * k + kw];
                }
              }
            }
          out[((static_cast<size_t>(oc) * dm.od + od) * dm.oh + oh) * dm.ow + ow] = acc;
        }

  auto xn = x.node, wn = w.node, bn = b.node;
  return make_result<T>({1, dm.oc, dm.od, dm.oh, dm.ow}, std::move(out), {x, w, b},
                        [xn, wn, bn, dm](Node<T>& self) {
    const int k = dm.k;
    for (int oc = 0; oc < dm.oc; ++oc)
      for (int od = 0; od < dm.od; ++od)
        for (int oh = 0; oh < dm.oh; ++oh)
          for (int ow = 0; ow < dm.ow; ++ow) {
            const T g =
                self.grad[((static_cast<size_t>(oc) * dm.od + od) * dm.oh + oh) * dm.ow + ow];
            if (g == T(0)) continue;
            if (bn->requires_grad) bn->grad[oc] += g;
            for (int ic = 0; ic < dm.ic; ++ic)
              for (int kd = 0; kd < k; ++kd) {
                const int id = od * dm.stride - dm.pad + kd;
                if (id < 0 || id >= dm.d) continue;
                for (int kh = 0; kh < k; ++kh) {
                  const int ih = oh * dm.stride - dm.pad + kh;
                  if (ih < 0 || ih >= dm.h) continue;
                  for (int kw = 0; kw < k; ++kw) {
                    const int iw = ow * dm.stride - dm.pad + kw;
                    if (iw < 0 || iw >= dm.w) continue;
                    const size_t xi =
                        ((static_cast<size_t>(ic) * dm.d + id) * dm.h + ih) * dm.w + iw;
                    const size_t wi =
                        (((static_cast<size_t>(oc) * dm.ic + ic) * k + kd) * k + kh) * k + kw;
                    if (xn->requires_grad) xn->grad[xi] += g * wn->values[wi];
                    if (wn->requires_grad) wn->grad[wi] += g * xn->values[xi];
                  }
                }
              }
          }
  });
}

template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                           int pad) {
  detail::check_rank5(x.shape(), "conv_transpose3d input");
  if (w.shape().size() != 5) throw ConfigError("conv_transpose3d: weight must be rank 5");
  detail::ConvDims dm;
  dm.ic = x.shape()[1];
  dm.d = x.shape()[2];
  dm.h = x.shape()[3];
  dm.w = x.shape()[4];
  dm.oc = w.shape()[1];
  dm.k = w.shape()[2];
  dm.stride = stride;
  dm.pad = pad;
  if (w.shape()[0] != dm.ic || w.shape()[3] != dm.k || w.shape()[4] != dm.k)
    throw ConfigError("conv_transpose3d: weight shape mismatch");
  if (b.size() != static_cast<size_t>(dm.oc))
    throw ConfigError("conv_transpose3d: bias size mismatch");
  dm.od = (dm.d - 1) * stride - 2 * pad + dm.k;
  dm.oh = (dm.h - 1) * stride - 2 * pad + dm.k;
  dm.ow = (dm.w - 1) * stride - 2 * pad + dm.k;
  if (dm.od < 1 || dm.oh < 1 || dm.ow < 1)
    throw ConfigError("conv_transpose3d: output would be empty");

  std::vector<T> out(static_cast<size_t>(dm.oc) * dm.od * dm.oh * dm.ow);
  for (int oc = 0; oc < dm.oc; ++oc)
    std::fill_n(out.begin() + static_cast<size_t>(oc) * dm.od * dm.oh * dm.ow,
                static_cast<size_t>(dm.od) * dm.oh * dm.ow, b.values()[oc]);

  const T* xv = x.values().data();
  const T* wv = w.values().data();
  const int k = dm.k;
  for (int ic = 0; ic < dm.ic; ++ic)
    for (int id = 0; id < dm.d; ++id)
      for (int ih = 0; ih < dm.h; ++ih)
        for (int iw = 0; iw < dm.w; ++iw) {
          const T v = xv[((static_cast<size_t>(ic) * dm.d + id) * dm.h + ih) * dm.w + iw];
          if (v == T(0)) continue;
          for (int oc = 0; oc < dm.oc; ++oc)
            for (int kd = 0; kd < k; ++kd) {
              const int od = id * stride - pad + kd;
              if (od < 0 || od >= dm.od) continue;
              for (int kh = 0; kh < k; ++kh) {
                const int oh = ih * stride - pad + kh;
                if (oh < 0 || oh >= dm.oh) continue;
                for (int kw = 0; kw < k; ++kw) {
                  const int ow = iw * stride - pad + kw;
                  if (ow < 0 || ow >= dm.ow) continue;
                  out[((static_cast<size_t>(oc) * dm.od + od) * dm.oh + oh) * dm.ow + ow] +=
                      v * wv[(((static_cast<size_t>(ic) * dm.oc + oc) * k + kd) * k + kh) * k + kw];
                }
              }
            }
        }

  auto xn = x.node, wn = w.node, bn = b.node;
  return make_result<T>({1, dm.oc, dm.od, dm.oh, dm.ow}, std::move(out), {x, w, b},
                        [xn, wn, bn, dm](Node<T>& self) {
    const int k = dm.k;
    if (bn->requires_grad)
      for (int oc = 0; oc < dm.oc; ++oc) {
        T acc = T(0);
        const size_t base = static_cast<size_t>(oc) * dm.od * dm.oh * dm.ow;
        for (size_t i = 0; i < static_cast<size_t>(dm.od) * dm.oh * dm.ow; ++i)
          acc += self.grad[base + i];
        bn->grad[oc] += acc;
      }
    for (int ic = 0; ic < dm.ic; ++ic)
      for (int id = 0; id < dm.d; ++id)
        for (int ih = 0; ih < dm.h; ++ih)
          for (int iw = 0; iw < dm.w; ++iw) {
            const size_t xi = ((static_cast<size_t>(ic) * dm.d + id) * dm.h + ih) * dm.w + iw;
            for (int oc = 0; oc < dm.oc; ++oc)
              for (int kd = 0; kd < k; ++kd) {
                const int od = id * dm.stride - dm.pad + kd;
                if (od < 0 || od >= dm.od) continue;
                for (int kh = 0; kh < k; ++kh) {
                  const int oh = ih * dm.stride - dm.pad + kh;
                  if (oh < 0 || oh >= dm.oh) continue;
                  for (int kw = 0; kw < k; ++kw) {
                    const int ow = iw * dm.stride - dm.pad + kw;
                    if (ow < 0 || ow >= dm.ow) continue;
                    const T g =
                        self.grad[((static_cast<size_t>(oc) * dm.od + od) * dm.oh + oh) * dm.ow +
                                  ow];
                    if (g == T(0)) continue;
                    const size_t wi =
                        (((static_cast<size_t>(ic) * dm.oc + oc) * k + kd) * k + kh) * k + kw;
                    if (xn->requires_grad) xn->grad[xi] += g * wn->values[wi];
                    if (wn->requires_grad) wn->grad[wi] += g * xn->values[xi];
                  }
                }
              }
          }
  });
}

}  // namespace fracgen::nn

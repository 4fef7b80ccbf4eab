#include "stereo/ops.hpp"

#include <cmath>
#include <cstring>

#include "stereo/kernels.hpp"
#include "stereo/threading.hpp"

namespace stereo {
namespace {

template <class T>
using Node = detail::TensorNode<T>;

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size());
  std::size_t acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

template <class T>
void check_same_shape(const char* op, const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// fn(i) computes output element i from raw input pointers.
template <class T, class F>
TensorT<T> map_elems(Shape shape, F&& fn) {
  auto out = TensorT<T>::make_uninit(std::move(shape));
  T* o = out.data();
  parallel_for(
      out.numel(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) o[i] = fn(i);
      },
      4096);
  return out;
}

// Accumulates dL/dx for a unary op; g(go, x, y) returns the input grad.
template <class T, class G>
void unary_grad(Node<T>& self, G&& g) {
  Node<T>& p = *self.parents[0];
  if (!p.requires_grad) return;
  T* gp = p.grad_acc();
  const T* go = self.grad.data();
  const T* xv = p.value.data();
  const T* yv = self.value.data();
  parallel_for(
      self.value.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) gp[i] += g(go[i], xv[i], yv[i]);
      },
      4096);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

// ===================================================================== shape

template <class T>
TensorT<T> reshape(const TensorT<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto out = TensorT<T>::make_uninit(std::move(shape));
  std::memcpy(out.data(), x.data(), x.numel() * sizeof(T));
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* go = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += go[i];
  });
  return out;
}

template <class T>
TensorT<T> permute(const TensorT<T>& x, const std::vector<std::size_t>& dims) {
  const std::size_t nd = x.ndim();
  if (dims.size() != nd) throw ShapeError("permute: axis list rank mismatch");
  std::vector<bool> seen(nd, false);
  Shape out_shape(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    if (dims[i] >= nd || seen[dims[i]]) throw ShapeError("permute: invalid axis list");
    seen[dims[i]] = true;
    out_shape[i] = x.extent(dims[i]);
  }
  const auto in_strides = row_major_strides(x.shape());
  std::vector<std::size_t> step(nd);
  for (std::size_t i = 0; i < nd; ++i) step[i] = in_strides[dims[i]];

  auto out = TensorT<T>::make_uninit(out_shape);
  // Odometer walk over the output index space tracking the source offset.
  auto walk = [&](const T* src, T* dst, bool gather) {
    std::vector<std::size_t> idx(nd, 0);
    std::size_t src_off = 0;
    const std::size_t total = shape_numel(out_shape);
    for (std::size_t o = 0; o < total; ++o) {
      if (gather) {
        dst[o] = src[src_off];
      } else {
        dst[src_off] += src[o];
      }
      for (std::size_t ax = nd; ax-- > 0;) {
        ++idx[ax];
        src_off += step[ax];
        if (idx[ax] < out_shape[ax]) break;
        src_off -= step[ax] * out_shape[ax];
        idx[ax] = 0;
      }
    }
  };
  walk(x.data(), out.data(), true);
  autograd_attach<T>(out, {x}, [walk](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    walk(self.grad.data(), p.grad_acc(), false);
  });
  return out;
}

template <class T>
TensorT<T> slice(const TensorT<T>& x, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= x.ndim() || start + len > x.extent(axis) || len == 0) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") invalid for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.extent(i);
  for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.extent(i);
  const std::size_t n_ax = x.extent(axis);

  auto out = TensorT<T>::make_uninit(out_shape);
  const T* in = x.data();
  T* o = out.data();
  for (std::size_t u = 0; u < outer; ++u) {
    std::memcpy(o + u * len * inner, in + (u * n_ax + start) * inner, len * inner * sizeof(T));
  }
  autograd_attach<T>(out, {x}, [outer, inner, n_ax, start, len](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* go = self.grad.data();
    for (std::size_t u = 0; u < outer; ++u) {
      T* dst = gp + (u * n_ax + start) * inner;
      const T* src = go + u * len * inner;
      for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
  return out;
}

template <class T>
TensorT<T> concat(const std::vector<TensorT<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat: empty input list");
  const std::size_t nd = xs[0].ndim();
  if (axis >= nd) throw ShapeError("concat: axis out of range");
  Shape out_shape = xs[0].shape();
  std::size_t total_ax = 0;
  for (const auto& x : xs) {
    if (x.ndim() != nd) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < nd; ++i) {
      if (i != axis && x.extent(i) != out_shape[i]) {
        throw ShapeError("concat: shape mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(out_shape));
      }
    }
    total_ax += x.extent(axis);
  }
  out_shape[axis] = total_ax;

  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
  for (std::size_t i = axis + 1; i < nd; ++i) inner *= out_shape[i];

  auto out = TensorT<T>::make_uninit(out_shape);
  T* o = out.data();
  std::vector<std::size_t> offsets(xs.size());
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    offsets[k] = off;
    const std::size_t ax_k = xs[k].extent(axis);
    const T* in = xs[k].data();
    for (std::size_t u = 0; u < outer; ++u) {
      std::memcpy(o + (u * total_ax + off) * inner, in + u * ax_k * inner,
                  ax_k * inner * sizeof(T));
    }
    off += ax_k;
  }

  // autograd_attach takes an initializer_list; register parents manually.
  if (grad_enabled()) {
    bool need = false;
    for (const auto& x : xs) need = need || x.requires_grad();
    if (need) {
      auto& n = *out.node();
      n.requires_grad = true;
      std::vector<std::size_t> ax_sizes(xs.size());
      for (std::size_t k = 0; k < xs.size(); ++k) {
        n.parents.push_back(xs[k].node());
        ax_sizes[k] = xs[k].extent(axis);
      }
      n.backward = [outer, inner, total_ax, offsets, ax_sizes](Node<T>& self) {
        const T* go = self.grad.data();
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          Node<T>& p = *self.parents[k];
          if (!p.requires_grad) continue;
          T* gp = p.grad_acc();
          for (std::size_t u = 0; u < outer; ++u) {
            const T* src = go + (u * total_ax + offsets[k]) * inner;
            T* dst = gp + u * ax_sizes[k] * inner;
            for (std::size_t i = 0; i < ax_sizes[k] * inner; ++i) dst[i] += src[i];
          }
        }
      };
    }
  }
  return out;
}

template <class T>
TensorT<T> expand(const TensorT<T>& x, std::size_t axis, std::size_t n) {
  if (axis >= x.ndim() || x.extent(axis) != 1) {
    throw ShapeError("expand: axis " + std::to_string(axis) + " of " + shape_str(x.shape()) +
                     " must have extent 1");
  }
  Shape out_shape = x.shape();
  out_shape[axis] = n;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.extent(i);
  for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.extent(i);

  auto out = TensorT<T>::make_uninit(out_shape);
  const T* in = x.data();
  T* o = out.data();
  for (std::size_t u = 0; u < outer; ++u) {
    for (std::size_t j = 0; j < n; ++j) {
      std::memcpy(o + (u * n + j) * inner, in + u * inner, inner * sizeof(T));
    }
  }
  autograd_attach<T>(out, {x}, [outer, inner, n](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* go = self.grad.data();
    for (std::size_t u = 0; u < outer; ++u) {
      for (std::size_t j = 0; j < n; ++j) {
        const T* src = go + (u * n + j) * inner;
        T* dst = gp + u * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <class T>
TensorT<T> pixel_shuffle2d(const TensorT<T>& x, std::size_t r) {
  if (x.ndim() != 3 || x.extent(0) % (r * r) != 0) {
    throw ShapeError("pixel_shuffle2d: need [C*r*r, H, W], got " + shape_str(x.shape()));
  }
  const std::size_t c_out = x.extent(0) / (r * r);
  const std::size_t h = x.extent(1), w = x.extent(2);
  auto out = TensorT<T>::make_uninit({c_out, h * r, w * r});

  auto move = [=](const T* src, T* dst, bool fwd) {
    for (std::size_t c = 0; c < c_out; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t dy = 0; dy < r; ++dy) {
          for (std::size_t xx = 0; xx < w; ++xx) {
            for (std::size_t dx = 0; dx < r; ++dx) {
              const std::size_t in_idx = ((c * r * r + dy * r + dx) * h + y) * w + xx;
              const std::size_t out_idx = (c * h * r + y * r + dy) * w * r + xx * r + dx;
              if (fwd) {
                dst[out_idx] = src[in_idx];
              } else {
                dst[in_idx] += src[out_idx];
              }
            }
          }
        }
      }
    }
  };
  move(x.data(), out.data(), true);
  autograd_attach<T>(out, {x}, [move](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    move(self.grad.data(), p.grad_acc(), false);
  });
  return out;
}

template <class T>
TensorT<T> roll2d(const TensorT<T>& x, std::int64_t shift_h, std::int64_t shift_w) {
  if (x.ndim() != 3) throw ShapeError("roll2d: need [C, H, W], got " + shape_str(x.shape()));
  const std::int64_t h = static_cast<std::int64_t>(x.extent(1));
  const std::int64_t w = static_cast<std::int64_t>(x.extent(2));
  const std::size_t sh = static_cast<std::size_t>(((shift_h % h) + h) % h);
  const std::size_t sw = static_cast<std::size_t>(((shift_w % w) + w) % w);
  const std::size_t c = x.extent(0), hh = x.extent(1), ww = x.extent(2);

  auto roll_copy = [=](const T* src, T* dst, std::size_t rh, std::size_t rw) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const T* sp = src + ci * hh * ww;
      T* dp = dst + ci * hh * ww;
      for (std::size_t y = 0; y < hh; ++y) {
        const std::size_t oy = (y + rh) % hh;
        for (std::size_t xx = 0; xx < ww; ++xx) dp[oy * ww + (xx + rw) % ww] = sp[y * ww + xx];
      }
    }
  };
  auto out = TensorT<T>::make_uninit(x.shape());
  roll_copy(x.data(), out.data(), sh, sw);
  autograd_attach<T>(out, {x}, [roll_copy, sh, sw, hh, ww](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    // inverse roll of the gradient, accumulated
    std::vector<T> tmp(self.grad.size());
    roll_copy(self.grad.data(), tmp.data(), (hh - sh) % hh, (ww - sw) % ww);
    T* gp = p.grad_acc();
    for (std::size_t i = 0; i < tmp.size(); ++i) gp[i] += tmp[i];
  });
  return out;
}

// ============================================================== elementwise

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("add", a, b);
  const T* pa = a.data();
  const T* pb = b.data();
  auto out = map_elems<T>(a.shape(), [&](std::size_t i) { return pa[i] + pb[i]; });
  autograd_attach<T>(out, {a, b}, [](Node<T>& self) {
    const T* go = self.grad.data();
    for (int k = 0; k < 2; ++k) {
      Node<T>& p = *self.parents[k];
      if (!p.requires_grad) continue;
      T* gp = p.grad_acc();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += go[i];
    }
  });
  return out;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("sub", a, b);
  const T* pa = a.data();
  const T* pb = b.data();
  auto out = map_elems<T>(a.shape(), [&](std::size_t i) { return pa[i] - pb[i]; });
  autograd_attach<T>(out, {a, b}, [](Node<T>& self) {
    const T* go = self.grad.data();
    Node<T>& pa_ = *self.parents[0];
    Node<T>& pb_ = *self.parents[1];
    if (pa_.requires_grad) {
      T* gp = pa_.grad_acc();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += go[i];
    }
    if (pb_.requires_grad) {
      T* gp = pb_.grad_acc();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] -= go[i];
    }
  });
  return out;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("mul", a, b);
  const T* pa = a.data();
  const T* pb = b.data();
  auto out = map_elems<T>(a.shape(), [&](std::size_t i) { return pa[i] * pb[i]; });
  autograd_attach<T>(out, {a, b}, [](Node<T>& self) {
    const T* go = self.grad.data();
    Node<T>& pa_ = *self.parents[0];
    Node<T>& pb_ = *self.parents[1];
    if (pa_.requires_grad) {
      T* gp = pa_.grad_acc();
      const T* bv = pb_.value.data();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += go[i] * bv[i];
    }
    if (pb_.requires_grad) {
      T* gp = pb_.grad_acc();
      const T* av = pa_.value.data();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += go[i] * av[i];
    }
  });
  return out;
}

template <class T>
TensorT<T> div_(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("div", a, b);
  const T* pa = a.data();
  const T* pb = b.data();
  auto out = map_elems<T>(a.shape(), [&](std::size_t i) { return pa[i] / pb[i]; });
  autograd_attach<T>(out, {a, b}, [](Node<T>& self) {
    const T* go = self.grad.data();
    Node<T>& pa_ = *self.parents[0];
    Node<T>& pb_ = *self.parents[1];
    const T* bv = pb_.value.data();
    if (pa_.requires_grad) {
      T* gp = pa_.grad_acc();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] += go[i] / bv[i];
    }
    if (pb_.requires_grad) {
      T* gp = pb_.grad_acc();
      const T* yv = self.value.data();
      for (std::size_t i = 0; i < self.value.size(); ++i) gp[i] -= go[i] * yv[i] / bv[i];
    }
  });
  return out;
}

template <class T>
TensorT<T> neg(const TensorT<T>& x) {
  return scalar_mul(x, T(-1));
}

template <class T>
TensorT<T> scalar_mul(const TensorT<T>& x, T s) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return in[i] * s; });
  autograd_attach<T>(out, {x}, [s](Node<T>& self) {
    unary_grad(self, [s](T go, T, T) { return go * s; });
  });
  return out;
}

template <class T>
TensorT<T> scalar_add(const TensorT<T>& x, T s) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return in[i] + s; });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T, T) { return go; });
  });
  return out;
}

template <class T>
TensorT<T> exp_(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return std::exp(in[i]); });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T, T y) { return go * y; });
  });
  return out;
}

template <class T>
TensorT<T> log_(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return std::log(in[i]); });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T xv, T) { return go / xv; });
  });
  return out;
}

template <class T>
TensorT<T> sqrt_(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return std::sqrt(in[i]); });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T, T y) { return go * T(0.5) / y; });
  });
  return out;
}

template <class T>
TensorT<T> abs_(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return std::abs(in[i]); });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T xv, T) { return xv > T(0) ? go : (xv < T(0) ? -go : T(0)); });
  });
  return out;
}

template <class T>
TensorT<T> tanh_(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return std::tanh(in[i]); });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T, T y) { return go * (T(1) - y * y); });
  });
  return out;
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) {
    const T v = in[i];
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T, T y) { return go * y * (T(1) - y); });
  });
  return out;
}

template <class T>
TensorT<T> gelu(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) {
    const double v = double(in[i]);
    return T(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T xv, T) {
      const double v = double(xv);
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      return go * T(cdf + v * pdf);
    });
  });
  return out;
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
  const T* in = x.data();
  auto out = map_elems<T>(x.shape(), [&](std::size_t i) { return in[i] > T(0) ? in[i] : T(0); });
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    unary_grad(self, [](T go, T xv, T) { return xv > T(0) ? go : T(0); });
  });
  return out;
}

template <class T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope) {
  const T* in = x.data();
  auto out =
      map_elems<T>(x.shape(), [&](std::size_t i) { return in[i] > T(0) ? in[i] : slope * in[i]; });
  autograd_attach<T>(out, {x}, [slope](Node<T>& self) {
    unary_grad(self, [slope](T go, T xv, T) { return xv > T(0) ? go : slope * go; });
  });
  return out;
}

template <class T>
TensorT<T> smooth_l1(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape("smooth_l1", a, b);
  const T* pa = a.data();
  const T* pb = b.data();
  auto out = map_elems<T>(a.shape(), [&](std::size_t i) {
    const T d = pa[i] - pb[i];
    const T ad = std::abs(d);
    return ad < T(1) ? T(0.5) * d * d : ad - T(0.5);
  });
  autograd_attach<T>(out, {a, b}, [](Node<T>& self) {
    const T* go = self.grad.data();
    Node<T>& pa_ = *self.parents[0];
    Node<T>& pb_ = *self.parents[1];
    const T* av = pa_.value.data();
    const T* bv = pb_.value.data();
    for (int k = 0; k < 2; ++k) {
      Node<T>& p = k == 0 ? pa_ : pb_;
      if (!p.requires_grad) continue;
      T* gp = p.grad_acc();
      const T sgn = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < self.value.size(); ++i) {
        const T d = av[i] - bv[i];
        const T dd = std::abs(d) < T(1) ? d : (d > T(0) ? T(1) : T(-1));
        gp[i] += sgn * go[i] * dd;
      }
    }
  });
  return out;
}

// =============================================================== reductions

template <class T>
TensorT<T> sum_all(const TensorT<T>& x) {
  const T* in = x.data();
  T acc = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += in[i];
  auto out = TensorT<T>::from({1}, {acc});
  autograd_attach<T>(out, {x}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < p.value.size(); ++i) gp[i] += g;
  });
  return out;
}

template <class T>
TensorT<T> mean_all(const TensorT<T>& x) {
  return scalar_mul(sum_all(x), T(1) / T(x.numel()));
}

template <class T>
TensorT<T> sum_axis(const TensorT<T>& x, std::size_t axis, bool keepdim) {
  if (axis >= x.ndim()) throw ShapeError("sum_axis: axis out of range for " + shape_str(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.extent(i);
  for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.extent(i);
  const std::size_t n_ax = x.extent(axis);

  Shape out_shape;
  for (std::size_t i = 0; i < x.ndim(); ++i) {
    if (i == axis) {
      if (keepdim) out_shape.push_back(1);
    } else {
      out_shape.push_back(x.extent(i));
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);

  auto out = TensorT<T>::make_uninit(out_shape);
  const T* in = x.data();
  T* o = out.data();
  parallel_for(
      outer,
      [&](std::size_t b, std::size_t e) {
        for (std::size_t u = b; u < e; ++u) {
          T* dst = o + u * inner;
          const T* base = in + u * n_ax * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] = base[i];
          for (std::size_t j = 1; j < n_ax; ++j) {
            const T* src = base + j * inner;
            for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
          }
        }
      },
      std::max<std::size_t>(1, 4096 / (n_ax * inner + 1)));
  autograd_attach<T>(out, {x}, [outer, inner, n_ax](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* go = self.grad.data();
    for (std::size_t u = 0; u < outer; ++u) {
      const T* src = go + u * inner;
      T* base = gp + u * n_ax * inner;
      for (std::size_t j = 0; j < n_ax; ++j) {
        T* dst = base + j * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

template <class T>
TensorT<T> masked_mean(const TensorT<T>& x, const TensorT<T>& mask) {
  check_same_shape("masked_mean", x, mask);
  const T* in = x.data();
  const T* m = mask.data();
  std::size_t count = 0;
  T acc = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (m[i] != T(0)) {
      acc += in[i];
      ++count;
    }
  }
  if (count == 0) throw ContractError("masked_mean: empty mask");
  auto out = TensorT<T>::from({1}, {acc / T(count)});
  autograd_attach<T>(out, {x, mask}, [count](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* m_ = self.parents[1]->value.data();
    const T g = self.grad[0] / T(count);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      if (m_[i] != T(0)) gp[i] += g;
    }
  });
  return out;
}

// ==================================================================== nn ops

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.ndim() < 2 || b.ndim() < 2) {
    throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.extent(a.ndim() - 2);
  const std::size_t ka = a.extent(a.ndim() - 1);
  const std::size_t kb = b.extent(b.ndim() - 2);
  const std::size_t n = b.extent(b.ndim() - 1);
  if (ka != kb) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  // Align leading batch extents right-to-left; each must match or be 1.
  const std::size_t nb = std::max(a.ndim(), b.ndim()) - 2;
  Shape batch(nb, 1), a_batch(nb, 1), b_batch(nb, 1);
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t ai = a.ndim() >= nb - i + 2 ? a.extent(a.ndim() - 2 - (nb - i)) : 1;
    const std::size_t bi = b.ndim() >= nb - i + 2 ? b.extent(b.ndim() - 2 - (nb - i)) : 1;
    if (ai != bi && ai != 1 && bi != 1) {
      throw ShapeError("matmul: batch extents incompatible, " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()));
    }
    a_batch[i] = ai;
    b_batch[i] = bi;
    batch[i] = std::max(ai, bi);
  }
  const std::size_t nbatch = shape_numel(batch);

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  auto out = TensorT<T>::zeros(out_shape);

  // Flat batch index -> slice offsets honouring broadcast (stride 0 on 1s).
  auto slice_offsets = [=](std::size_t idx, std::size_t& ao, std::size_t& bo) {
    std::size_t a_off = 0, b_off = 0, a_mul = 1, b_mul = 1;
    for (std::size_t i = nb; i-- > 0;) {
      const std::size_t d = idx % batch[i];
      idx /= batch[i];
      if (a_batch[i] != 1) a_off += d * a_mul;
      if (b_batch[i] != 1) b_off += d * b_mul;
      a_mul *= a_batch[i];
      b_mul *= b_batch[i];
    }
    ao = a_off;
    bo = b_off;
  };

  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  parallel_for(
      nbatch,
      [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
          std::size_t ao, bo;
          slice_offsets(s, ao, bo);
          gemm_nn(pa + ao * m * ka, pb + bo * ka * n, po + s * m * n, m, ka, n);
        }
      },
      std::max<std::size_t>(1, 16384 / (2 * m * ka * n + 1)));

  autograd_attach<T>(out, {a, b}, [=](Node<T>& self) {
    Node<T>& pa_ = *self.parents[0];
    Node<T>& pb_ = *self.parents[1];
    const T* go = self.grad.data();
    // dA += dY * B^T ; dB += A^T * dY, broadcast batches accumulate.
    std::vector<T> bt, at;
    if (pa_.requires_grad) bt.resize(ka * n);
    if (pb_.requires_grad) at.resize(m * ka);
    T* ga = pa_.requires_grad ? pa_.grad_acc() : nullptr;
    T* gb = pb_.requires_grad ? pb_.grad_acc() : nullptr;
    for (std::size_t s = 0; s < nbatch; ++s) {
      std::size_t ao, bo;
      slice_offsets(s, ao, bo);
      const T* gy = go + s * m * n;
      if (ga) {
        transpose2d(pb_.value.data() + bo * ka * n, bt.data(), ka, n);  // -> [n, ka]
        gemm_nn(gy, bt.data(), ga + ao * m * ka, m, n, ka);
      }
      if (gb) {
        transpose2d(pa_.value.data() + ao * m * ka, at.data(), m, ka);  // -> [ka, m]
        gemm_nn(at.data(), gy, gb + bo * ka * n, ka, m, n);
      }
    }
  });
  return out;
}

template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (w.ndim() != 2) throw ShapeError("linear: weight must be [Out, In]");
  const std::size_t in_w = w.extent(1);
  const std::size_t out_w = w.extent(0);
  if (x.ndim() < 1 || x.extent(x.ndim() - 1) != in_w) {
    throw ShapeError("linear: input width of " + shape_str(x.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  }
  if (b.defined() && (b.ndim() != 1 || b.extent(0) != out_w)) {
    throw ShapeError("linear: bias shape " + shape_str(b.shape()) + " does not match out width");
  }
  const std::size_t rows = x.numel() / in_w;
  Shape out_shape = x.shape();
  out_shape.back() = out_w;
  auto out = TensorT<T>::make_uninit(out_shape);

  T* po = out.data();
  if (b.defined()) {
    const T* pb = b.data();
    for (std::size_t r = 0; r < rows; ++r) std::memcpy(po + r * out_w, pb, out_w * sizeof(T));
  } else {
    std::fill(po, po + out.numel(), T(0));
  }
  std::vector<T> wt(in_w * out_w);
  transpose2d(w.data(), wt.data(), out_w, in_w);  // [In, Out]
  gemm_nn(x.data(), wt.data(), po, rows, in_w, out_w);

  auto bw = [rows, in_w, out_w, has_bias = b.defined()](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pw = *self.parents[1];
    const T* gy = self.grad.data();
    if (px.requires_grad) {
      gemm_nn(gy, pw.value.data(), px.grad_acc(), rows, out_w, in_w);
    }
    if (pw.requires_grad) {
      std::vector<T> gyt(out_w * rows);
      transpose2d(gy, gyt.data(), rows, out_w);
      gemm_nn(gyt.data(), px.value.data(), pw.grad_acc(), out_w, rows, in_w);
    }
    if (has_bias) {
      Node<T>& pbias = *self.parents[2];
      if (pbias.requires_grad) {
        T* gb = pbias.grad_acc();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* row = gy + r * out_w;
          for (std::size_t o = 0; o < out_w; ++o) gb[o] += row[o];
        }
      }
    }
  };
  if (b.defined()) {
    autograd_attach<T>(out, {x, w, b}, bw);
  } else {
    autograd_attach<T>(out, {x, w}, bw);
  }
  return out;
}

template <class T>
TensorT<T> softmax(const TensorT<T>& x, std::size_t axis) {
  if (axis >= x.ndim()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.extent(i);
  for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.extent(i);
  const std::size_t n_ax = x.extent(axis);

  auto out = TensorT<T>::make_uninit(x.shape());
  const T* in = x.data();
  T* o = out.data();
  bool bad = false;
  parallel_for(
      outer * inner,
      [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
          const std::size_t u = p / inner, v = p % inner;
          const T* src = in + (u * n_ax) * inner + v;
          T* dst = o + (u * n_ax) * inner + v;
          T m = src[0];
          for (std::size_t j = 1; j < n_ax; ++j) m = std::max(m, src[j * inner]);
          if (!std::isfinite(double(m))) {
            bad = true;
            return;
          }
          T denom = 0;
          for (std::size_t j = 0; j < n_ax; ++j) {
            const T e = std::exp(src[j * inner] - m);
            dst[j * inner] = e;
            denom += e;
          }
          const T inv = T(1) / denom;
          for (std::size_t j = 0; j < n_ax; ++j) dst[j * inner] *= inv;
        }
      },
      std::max<std::size_t>(1, 2048 / (n_ax + 1)));
  if (bad) throw NumericError("softmax: non-finite input");

  autograd_attach<T>(out, {x}, [outer, inner, n_ax](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* go = self.grad.data();
    const T* yv = self.value.data();
    parallel_for(
        outer * inner,
        [&](std::size_t p0, std::size_t p1) {
          for (std::size_t q = p0; q < p1; ++q) {
            const std::size_t u = q / inner, v = q % inner;
            const std::size_t base = (u * n_ax) * inner + v;
            T dot = 0;
            for (std::size_t j = 0; j < n_ax; ++j) dot += go[base + j * inner] * yv[base + j * inner];
            for (std::size_t j = 0; j < n_ax; ++j) {
              const std::size_t idx = base + j * inner;
              gp[idx] += yv[idx] * (go[idx] - dot);
            }
          }
        },
        std::max<std::size_t>(1, 2048 / (n_ax + 1)));
  });
  return out;
}

template <class T>
TensorT<T> layer_norm(const TensorT<T>& x, std::size_t axis, const TensorT<T>& gamma,
                      const TensorT<T>& beta, T eps) {
  if (axis >= x.ndim()) throw ShapeError("layer_norm: axis out of range for " + shape_str(x.shape()));
  const std::size_t n_ax = x.extent(axis);
  if (gamma.ndim() != 1 || gamma.extent(0) != n_ax || beta.ndim() != 1 || beta.extent(0) != n_ax) {
    throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(n_ax) + "], got " +
                     shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.extent(i);
  for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.extent(i);
  const std::size_t positions = outer * inner;

  auto out = TensorT<T>::make_uninit(x.shape());
  std::vector<T> mean(positions), rstd(positions);
  const T* in = x.data();
  const T* g = gamma.data();
  const T* be = beta.data();
  T* o = out.data();
  parallel_for(
      positions,
      [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
          const std::size_t u = p / inner, v = p % inner;
          const std::size_t base = (u * n_ax) * inner + v;
          T mu = 0;
          for (std::size_t j = 0; j < n_ax; ++j) mu += in[base + j * inner];
          mu /= T(n_ax);
          T var = 0;
          for (std::size_t j = 0; j < n_ax; ++j) {
            const T d = in[base + j * inner] - mu;
            var += d * d;
          }
          var /= T(n_ax);
          const T rs = T(1) / std::sqrt(var + eps);
          mean[p] = mu;
          rstd[p] = rs;
          for (std::size_t j = 0; j < n_ax; ++j) {
            o[base + j * inner] = (in[base + j * inner] - mu) * rs * g[j] + be[j];
          }
        }
      },
      std::max<std::size_t>(1, 1024 / (n_ax + 1)));

  autograd_attach<T>(out, {x, gamma, beta},
                     [outer, inner, n_ax, mean = std::move(mean), rstd = std::move(rstd)](Node<T>& self) {
                       Node<T>& px = *self.parents[0];
                       Node<T>& pg = *self.parents[1];
                       Node<T>& pb = *self.parents[2];
                       const T* go = self.grad.data();
                       const T* xv = px.value.data();
                       const T* gv = pg.value.data();
                       const std::size_t positions = outer * inner;
                       T* gx = px.requires_grad ? px.grad_acc() : nullptr;
                       T* gg = pg.requires_grad ? pg.grad_acc() : nullptr;
                       T* gb = pb.requires_grad ? pb.grad_acc() : nullptr;
                       for (std::size_t p = 0; p < positions; ++p) {
                         const std::size_t u = p / inner, v = p % inner;
                         const std::size_t base = (u * n_ax) * inner + v;
                         const T mu = mean[p], rs = rstd[p];
                         T s1 = 0, s2 = 0;
                         for (std::size_t j = 0; j < n_ax; ++j) {
                           const std::size_t idx = base + j * inner;
                           const T xh = (xv[idx] - mu) * rs;
                           const T gg_ = go[idx] * gv[j];
                           s1 += gg_;
                           s2 += gg_ * xh;
                           if (gg) gg[j] += go[idx] * xh;
                           if (gb) gb[j] += go[idx];
                         }
                         if (gx) {
                           s1 /= T(n_ax);
                           s2 /= T(n_ax);
                           for (std::size_t j = 0; j < n_ax; ++j) {
                             const std::size_t idx = base + j * inner;
                             const T xh = (xv[idx] - mu) * rs;
                             gx[idx] += rs * (go[idx] * gv[j] - s1 - xh * s2);
                           }
                         }
                       }
                     });
  return out;
}

// ------------------------------------------------------------- convolution

namespace {

// im2col for [C,H,W] -> cols [C*kh*kw, P]; zero fill outside.
template <class T>
void im2col2d(const T* x, T* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo) {
  const std::size_t p_total = ho * wo;
  parallel_for(
      c,
      [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ci = c0; ci < c1; ++ci) {
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) {
              T* row = cols + ((ci * kh + dy) * kw + dx) * p_total;
              const T* src = x + ci * h * w;
              for (std::size_t oy = 0; oy < ho; ++oy) {
                const std::int64_t iy = std::int64_t(oy * stride + dy) - std::int64_t(pad);
                T* dst = row + oy * wo;
                if (iy < 0 || iy >= std::int64_t(h)) {
                  std::fill(dst, dst + wo, T(0));
                  continue;
                }
                for (std::size_t ox = 0; ox < wo; ++ox) {
                  const std::int64_t ix = std::int64_t(ox * stride + dx) - std::int64_t(pad);
                  dst[ox] = (ix < 0 || ix >= std::int64_t(w)) ? T(0) : src[iy * w + ix];
                }
              }
            }
          }
        }
      },
      1);
}

// Transpose of im2col: scatter-adds cols [C*kh*kw, P] back into dx [C,H,W].
template <class T>
void col2im2d(const T* cols, T* dx, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
              std::size_t kw, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo) {
  const std::size_t p_total = ho * wo;
  parallel_for(
      c,
      [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ci = c0; ci < c1; ++ci) {
          T* dst_ch = dx + ci * h * w;
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx_ = 0; dx_ < kw; ++dx_) {
              const T* row = cols + ((ci * kh + dy) * kw + dx_) * p_total;
              for (std::size_t oy = 0; oy < ho; ++oy) {
                const std::int64_t iy = std::int64_t(oy * stride + dy) - std::int64_t(pad);
                if (iy < 0 || iy >= std::int64_t(h)) continue;
                const T* src = row + oy * wo;
                for (std::size_t ox = 0; ox < wo; ++ox) {
                  const std::int64_t ix = std::int64_t(ox * stride + dx_) - std::int64_t(pad);
                  if (ix < 0 || ix >= std::int64_t(w)) continue;
                  dst_ch[iy * w + ix] += src[ox];
                }
              }
            }
          }
        }
      },
      1);
}

// im2col for [C,D,H,W] -> cols [C*kd*kh*kw, P]; same-padding k/2 per axis.
template <class T>
void im2col3d(const T* x, T* cols, std::size_t c, std::size_t d, std::size_t h, std::size_t w,
              std::size_t kd, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t dout,
              std::size_t ho, std::size_t wo) {
  const std::size_t p_total = dout * ho * wo;
  const std::int64_t pd = kd / 2, ph = kh / 2, pw = kw / 2;
  parallel_for(
      c * kd,
      [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
          const std::size_t ci = i / kd, dz = i % kd;
          for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) {
              T* row = cols + (((ci * kd + dz) * kh + dy) * kw + dx) * p_total;
              const T* src = x + ci * d * h * w;
              for (std::size_t od = 0; od < dout; ++od) {
                const std::int64_t iz = std::int64_t(od * stride + dz) - pd;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const std::int64_t iy = std::int64_t(oy * stride + dy) - ph;
                  T* dst = row + (od * ho + oy) * wo;
                  if (iz < 0 || iz >= std::int64_t(d) || iy < 0 || iy >= std::int64_t(h)) {
                    std::fill(dst, dst + wo, T(0));
                    continue;
                  }
                  const T* plane = src + (iz * std::int64_t(h) + iy) * std::int64_t(w);
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const std::int64_t ix = std::int64_t(ox * stride + dx) - pw;
                    dst[ox] = (ix < 0 || ix >= std::int64_t(w)) ? T(0) : plane[ix];
                  }
                }
              }
            }
          }
        }
      },
      1);
}

template <class T>
void col2im3d(const T* cols, T* dx, std::size_t c, std::size_t d, std::size_t h, std::size_t w,
              std::size_t kd, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t dout,
              std::size_t ho, std::size_t wo) {
  const std::size_t p_total = dout * ho * wo;
  const std::int64_t pd = kd / 2, ph = kh / 2, pw = kw / 2;
  parallel_for(
      c,
      [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ci = c0; ci < c1; ++ci) {
          T* dst_ch = dx + ci * d * h * w;
          for (std::size_t dz = 0; dz < kd; ++dz) {
            for (std::size_t dy = 0; dy < kh; ++dy) {
              for (std::size_t dxk = 0; dxk < kw; ++dxk) {
                const T* row = cols + (((ci * kd + dz) * kh + dy) * kw + dxk) * p_total;
                for (std::size_t od = 0; od < dout; ++od) {
                  const std::int64_t iz = std::int64_t(od * stride + dz) - pd;
                  if (iz < 0 || iz >= std::int64_t(d)) continue;
                  for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = std::int64_t(oy * stride + dy) - ph;
                    if (iy < 0 || iy >= std::int64_t(h)) continue;
                    const T* src = row + (od * ho + oy) * wo;
                    T* plane = dst_ch + (iz * std::int64_t(h) + iy) * std::int64_t(w);
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                      const std::int64_t ix = std::int64_t(ox * stride + dxk) - pw;
                      if (ix < 0 || ix >= std::int64_t(w)) continue;
                      plane[ix] += src[ox];
                    }
                  }
                }
              }
            }
          }
        }
      },
      1);
}

}  // namespace

template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, std::size_t stride,
                  std::size_t padding) {
  if (x.ndim() != 3 || w.ndim() != 4) {
    throw ShapeError("conv2d: need x [C,H,W] and w [Co,Ci,kh,kw], got " + shape_str(x.shape()) +
                     " and " + shape_str(w.shape()));
  }
  const std::size_t ci = x.extent(0), h = x.extent(1), ww_ = x.extent(2);
  const std::size_t co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != ci) {
    throw ShapeError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(w.shape()));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw ConfigError("conv2d: kernel extents must be odd");
  if (h + 2 * padding < kh || ww_ + 2 * padding < kw) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  if ((h + 2 * padding - kh) % stride != 0 || (ww_ + 2 * padding - kw) % stride != 0) {
    throw ConfigError("conv2d: non-integral output extent for stride " + std::to_string(stride));
  }
  const std::size_t ho = (h + 2 * padding - kh) / stride + 1;
  const std::size_t wo = (ww_ + 2 * padding - kw) / stride + 1;
  const std::size_t ckk = ci * kh * kw;
  const std::size_t p_total = ho * wo;

  std::vector<T> cols(ckk * p_total);
  im2col2d(x.data(), cols.data(), ci, h, ww_, kh, kw, stride, padding, ho, wo);

  auto out = TensorT<T>::make_uninit({co, ho, wo});
  T* po = out.data();
  if (b.defined()) {
    const T* pb = b.data();
    for (std::size_t oc = 0; oc < co; ++oc) std::fill(po + oc * p_total, po + (oc + 1) * p_total, pb[oc]);
  } else {
    std::fill(po, po + out.numel(), T(0));
  }
  gemm_nn(w.data(), cols.data(), po, co, ckk, p_total);

  auto bw = [=, has_bias = b.defined()](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pw = *self.parents[1];
    const T* gy = self.grad.data();
    if (pw.requires_grad) {
      std::vector<T> cols2(ckk * p_total), colst(p_total * ckk);
      im2col2d(px.value.data(), cols2.data(), ci, h, ww_, kh, kw, stride, padding, ho, wo);
      transpose2d(cols2.data(), colst.data(), ckk, p_total);
      gemm_nn(gy, colst.data(), pw.grad_acc(), co, p_total, ckk);
    }
    if (px.requires_grad) {
      std::vector<T> wt(ckk * co), dcols(ckk * p_total, T(0));
      transpose2d(pw.value.data(), wt.data(), co, ckk);
      gemm_nn(wt.data(), gy, dcols.data(), ckk, co, p_total);
      col2im2d(dcols.data(), px.grad_acc(), ci, h, ww_, kh, kw, stride, padding, ho, wo);
    }
    if (has_bias) {
      Node<T>& pb_ = *self.parents[2];
      if (pb_.requires_grad) {
        T* gb = pb_.grad_acc();
        for (std::size_t oc = 0; oc < co; ++oc) {
          T acc = 0;
          for (std::size_t p = 0; p < p_total; ++p) acc += gy[oc * p_total + p];
          gb[oc] += acc;
        }
      }
    }
  };
  if (b.defined()) {
    autograd_attach<T>(out, {x, w, b}, bw);
  } else {
    autograd_attach<T>(out, {x, w}, bw);
  }
  return out;
}

template <class T>
TensorT<T> conv3d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  std::size_t stride) {
  if (x.ndim() != 4 || w.ndim() != 5) {
    throw ShapeError("conv3d: need x [C,D,H,W] and w [Co,Ci,kd,kh,kw], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  }
  const std::size_t ci = x.extent(0), d = x.extent(1), h = x.extent(2), ww_ = x.extent(3);
  const std::size_t co = w.extent(0), kd = w.extent(2), kh = w.extent(3), kw = w.extent(4);
  if (w.extent(1) != ci) {
    throw ShapeError("conv3d: channel mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(w.shape()));
  }
  if (kd % 2 == 0 || kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("conv3d: kernel extents must be odd");
  }
  // Same-padding k/2: out = ceil(in / stride) for any odd kernel.
  const std::size_t dout = (d + 2 * (kd / 2) - kd) / stride + 1;
  const std::size_t ho = (h + 2 * (kh / 2) - kh) / stride + 1;
  const std::size_t wo = (ww_ + 2 * (kw / 2) - kw) / stride + 1;
  const std::size_t ckk = ci * kd * kh * kw;
  const std::size_t p_total = dout * ho * wo;

  std::vector<T> cols(ckk * p_total);
  im2col3d(x.data(), cols.data(), ci, d, h, ww_, kd, kh, kw, stride, dout, ho, wo);

  auto out = TensorT<T>::make_uninit({co, dout, ho, wo});
  T* po = out.data();
  if (b.defined()) {
    const T* pb = b.data();
    for (std::size_t oc = 0; oc < co; ++oc) std::fill(po + oc * p_total, po + (oc + 1) * p_total, pb[oc]);
  } else {
    std::fill(po, po + out.numel(), T(0));
  }
  gemm_nn(w.data(), cols.data(), po, co, ckk, p_total);

  auto bw = [=, has_bias = b.defined()](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pw = *self.parents[1];
    const T* gy = self.grad.data();
    if (pw.requires_grad) {
      std::vector<T> cols2(ckk * p_total), colst(p_total * ckk);
      im2col3d(px.value.data(), cols2.data(), ci, d, h, ww_, kd, kh, kw, stride, dout, ho, wo);
      transpose2d(cols2.data(), colst.data(), ckk, p_total);
      gemm_nn(gy, colst.data(), pw.grad_acc(), co, p_total, ckk);
    }
    if (px.requires_grad) {
      std::vector<T> wt(ckk * co), dcols(ckk * p_total, T(0));
      transpose2d(pw.value.data(), wt.data(), co, ckk);
      gemm_nn(wt.data(), gy, dcols.data(), ckk, co, p_total);
      col2im3d(dcols.data(), px.grad_acc(), ci, d, h, ww_, kd, kh, kw, stride, dout, ho, wo);
    }
    if (has_bias) {
      Node<T>& pb_ = *self.parents[2];
      if (pb_.requires_grad) {
        T* gb = pb_.grad_acc();
        for (std::size_t oc = 0; oc < co; ++oc) {
          T acc = 0;
          for (std::size_t p = 0; p < p_total; ++p) acc += gy[oc * p_total + p];
          gb[oc] += acc;
        }
      }
    }
  };
  if (b.defined()) {
    autograd_attach<T>(out, {x, w, b}, bw);
  } else {
    autograd_attach<T>(out, {x, w}, bw);
  }
  return out;
}

template <class T>
TensorT<T> conv_transpose3d_k2s2(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                                 std::size_t out_d, std::size_t out_h, std::size_t out_w) {
  if (x.ndim() != 4 || w.ndim() != 5 || w.extent(2) != 2 || w.extent(3) != 2 || w.extent(4) != 2) {
    throw ShapeError("conv_transpose3d_k2s2: need x [Ci,D,H,W] and w [Ci,Co,2,2,2]");
  }
  const std::size_t ci = x.extent(0), d = x.extent(1), h = x.extent(2), ww_ = x.extent(3);
  const std::size_t co = w.extent(1);
  if (w.extent(0) != ci) throw ShapeError("conv_transpose3d_k2s2: channel mismatch");
  auto ok = [](std::size_t in, std::size_t out) { return out == 2 * in || out + 1 == 2 * in; };
  if (!ok(d, out_d) || !ok(h, out_h) || !ok(ww_, out_w)) {
    throw ShapeError("conv_transpose3d_k2s2: output extents must be 2*in or 2*in-1");
  }

  auto out = TensorT<T>::make_uninit({co, out_d, out_h, out_w});
  const T* px = x.data();
  const T* pw = w.data();
  T* po = out.data();
  const T* pb = b.defined() ? b.data() : nullptr;
  // Kernel 2 stride 2: each output voxel has exactly one source voxel.
  parallel_for(
      co,
      [&](std::size_t o0, std::size_t o1) {
        for (std::size_t oc = o0; oc < o1; ++oc) {
          for (std::size_t od = 0; od < out_d; ++od) {
            const std::size_t id = od >> 1, kd = od & 1;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
              const std::size_t iy = oy >> 1, ky = oy & 1;
              T* dst = po + ((oc * out_d + od) * out_h + oy) * out_w;
              for (std::size_t ox = 0; ox < out_w; ++ox) {
                const std::size_t ix = ox >> 1, kx = ox & 1;
                T acc = pb ? pb[oc] : T(0);
                for (std::size_t c = 0; c < ci; ++c) {
                  acc += px[((c * d + id) * h + iy) * ww_ + ix] *
                         pw[(((c * co + oc) * 2 + kd) * 2 + ky) * 2 + kx];
                }
                dst[ox] = acc;
              }
            }
          }
        }
      },
      1);

  auto bw = [=, has_bias = b.defined()](Node<T>& self) {
    Node<T>& px_ = *self.parents[0];
    Node<T>& pw_ = *self.parents[1];
    const T* gy = self.grad.data();
    const T* xv = px_.value.data();
    const T* wv = pw_.value.data();
    if (px_.requires_grad) {
      T* gx = px_.grad_acc();
      parallel_for(
          ci,
          [&](std::size_t c0, std::size_t c1) {
            for (std::size_t c = c0; c < c1; ++c) {
              for (std::size_t id = 0; id < d; ++id) {
                for (std::size_t iy = 0; iy < h; ++iy) {
                  for (std::size_t ix = 0; ix < ww_; ++ix) {
                    T acc = 0;
                    for (std::size_t oc = 0; oc < co; ++oc) {
                      for (std::size_t kd = 0; kd < 2; ++kd) {
                        const std::size_t od = 2 * id + kd;
                        if (od >= out_d) continue;
                        for (std::size_t ky = 0; ky < 2; ++ky) {
                          const std::size_t oy = 2 * iy + ky;
                          if (oy >= out_h) continue;
                          for (std::size_t kx = 0; kx < 2; ++kx) {
                            const std::size_t ox = 2 * ix + kx;
                            if (ox >= out_w) continue;
                            acc += gy[((oc * out_d + od) * out_h + oy) * out_w + ox] *
                                   wv[(((c * co + oc) * 2 + kd) * 2 + ky) * 2 + kx];
                          }
                        }
                      }
                    }
                    gx[((c * d + id) * h + iy) * ww_ + ix] += acc;
                  }
                }
              }
            }
          },
          1);
    }
    if (pw_.requires_grad) {
      T* gw = pw_.grad_acc();
      parallel_for(
          ci,
          [&](std::size_t c0, std::size_t c1) {
            for (std::size_t c = c0; c < c1; ++c) {
              for (std::size_t oc = 0; oc < co; ++oc) {
                for (std::size_t kd = 0; kd < 2; ++kd) {
                  for (std::size_t ky = 0; ky < 2; ++ky) {
                    for (std::size_t kx = 0; kx < 2; ++kx) {
                      T acc = 0;
                      for (std::size_t id = 0; id < d; ++id) {
                        const std::size_t od = 2 * id + kd;
                        if (od >= out_d) continue;
                        for (std::size_t iy = 0; iy < h; ++iy) {
                          const std::size_t oy = 2 * iy + ky;
                          if (oy >= out_h) continue;
                          for (std::size_t ix = 0; ix < ww_; ++ix) {
                            const std::size_t ox = 2 * ix + kx;
                            if (ox >= out_w) continue;
                            acc += xv[((c * d + id) * h + iy) * ww_ + ix] *
                                   gy[((oc * out_d + od) * out_h + oy) * out_w + ox];
                          }
                        }
                      }
                      gw[(((c * co + oc) * 2 + kd) * 2 + ky) * 2 + kx] += acc;
                    }
                  }
                }
              }
            }
          },
          1);
    }
    if (has_bias) {
      Node<T>& pb_ = *self.parents[2];
      if (pb_.requires_grad) {
        T* gb = pb_.grad_acc();
        const std::size_t plane = out_d * out_h * out_w;
        for (std::size_t oc = 0; oc < co; ++oc) {
          T acc = 0;
          for (std::size_t p = 0; p < plane; ++p) acc += gy[oc * plane + p];
          gb[oc] += acc;
        }
      }
    }
  };
  if (b.defined()) {
    autograd_attach<T>(out, {x, w, b}, bw);
  } else {
    autograd_attach<T>(out, {x, w}, bw);
  }
  return out;
}

template <class T>
TensorT<T> unfold2d(const TensorT<T>& x, std::size_t k, std::size_t stride) {
  if (x.ndim() != 3) throw ShapeError("unfold2d: need [C,H,W], got " + shape_str(x.shape()));
  if (k % 2 == 0) throw ConfigError("unfold2d: window size must be odd");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t pad = k / 2;
  if (h + 2 * pad < k || w + 2 * pad < k) throw ShapeError("unfold2d: window larger than padded input");
  if ((h + 2 * pad - k) % stride != 0 || (w + 2 * pad - k) % stride != 0) {
    throw ConfigError("unfold2d: non-integral location grid for stride " + std::to_string(stride));
  }
  const std::size_t ho = (h + 2 * pad - k) / stride + 1;
  const std::size_t wo = (w + 2 * pad - k) / stride + 1;
  const std::size_t L = ho * wo;

  auto out = TensorT<T>::make_uninit({c * k * k, L});
  im2col2d(x.data(), out.data(), c, h, w, k, k, stride, pad, ho, wo);
  autograd_attach<T>(out, {x}, [=](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    col2im2d(self.grad.data(), p.grad_acc(), c, h, w, k, k, stride, pad, ho, wo);
  });
  return out;
}

template <class T>
TensorT<T> fold2d(const TensorT<T>& cols, std::size_t channels, std::size_t h, std::size_t w,
                  std::size_t k, bool normalize) {
  if (cols.ndim() != 2 || cols.extent(0) != channels * k * k || cols.extent(1) != h * w) {
    throw ShapeError("fold2d: cols " + shape_str(cols.shape()) + " does not match C=" +
                     std::to_string(channels) + " H=" + std::to_string(h) + " W=" + std::to_string(w) +
                     " k=" + std::to_string(k));
  }
  if (k % 2 == 0) throw ConfigError("fold2d: window size must be odd");
  const std::size_t pad = k / 2;

  auto out = TensorT<T>::zeros({channels, h, w});
  col2im2d(cols.data(), out.data(), channels, h, w, k, k, 1, pad, h, w);

  std::vector<T> counts;
  if (normalize) {
    counts.assign(h * w, T(0));
    for (std::size_t dy = 0; dy < k; ++dy) {
      for (std::size_t dx = 0; dx < k; ++dx) {
        for (std::size_t oy = 0; oy < h; ++oy) {
          const std::int64_t iy = std::int64_t(oy + dy) - std::int64_t(pad);
          if (iy < 0 || iy >= std::int64_t(h)) continue;
          for (std::size_t ox = 0; ox < w; ++ox) {
            const std::int64_t ix = std::int64_t(ox + dx) - std::int64_t(pad);
            if (ix < 0 || ix >= std::int64_t(w)) continue;
            counts[iy * w + ix] += T(1);
          }
        }
      }
    }
    T* po = out.data();
    for (std::size_t ci = 0; ci < channels; ++ci) {
      for (std::size_t p = 0; p < h * w; ++p) po[ci * h * w + p] /= counts[p];
    }
  }

  autograd_attach<T>(out, {cols}, [=, counts = std::move(counts)](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    // gather: dcols[r, p] = g[ci, iy, ix] (optionally / count)
    std::vector<T> g(self.grad);
    if (normalize) {
      for (std::size_t ci = 0; ci < channels; ++ci) {
        for (std::size_t q = 0; q < h * w; ++q) g[ci * h * w + q] /= counts[q];
      }
    }
    std::vector<T> dcols(p.value.size());
    im2col2d(g.data(), dcols.data(), channels, h, w, k, k, 1, pad, h, w);
    T* gp = p.grad_acc();
    for (std::size_t i = 0; i < dcols.size(); ++i) gp[i] += dcols[i];
  });
  return out;
}

template <class T>
TensorT<T> upsample_bilinear2d(const TensorT<T>& x, std::size_t factor) {
  if (x.ndim() != 3) throw ShapeError("upsample_bilinear2d: need [C,H,W]");
  if (factor == 0) throw ConfigError("upsample_bilinear2d: factor must be positive");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t oh = h * factor, ow = w * factor;
  auto out = TensorT<T>::make_uninit({c, oh, ow});

  auto src_coord = [](std::size_t o, std::size_t f, std::size_t in_n, std::size_t& lo,
                      std::size_t& hi, T& fr) {
    const double s = (double(o) + 0.5) / double(f) - 0.5;
    const double sc = std::min(std::max(s, 0.0), double(in_n - 1));
    lo = in_n == 1 ? 0 : std::min(std::size_t(sc), in_n - 2);
    hi = in_n == 1 ? 0 : lo + 1;
    fr = T(sc - double(lo));
  };

  const T* in = x.data();
  T* o = out.data();
  parallel_for(
      c,
      [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ci = c0; ci < c1; ++ci) {
          const T* s = in + ci * h * w;
          T* d = o + ci * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            std::size_t y0, y1;
            T fy;
            src_coord(oy, factor, h, y0, y1, fy);
            for (std::size_t ox = 0; ox < ow; ++ox) {
              std::size_t x0, x1;
              T fx;
              src_coord(ox, factor, w, x0, x1, fx);
              d[oy * ow + ox] = (T(1) - fy) * ((T(1) - fx) * s[y0 * w + x0] + fx * s[y0 * w + x1]) +
                                fy * ((T(1) - fx) * s[y1 * w + x0] + fx * s[y1 * w + x1]);
            }
          }
        }
      },
      1);

  autograd_attach<T>(out, {x}, [=](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    T* gp = p.grad_acc();
    const T* go = self.grad.data();
    parallel_for(
        c,
        [&](std::size_t c0, std::size_t c1) {
          for (std::size_t ci = c0; ci < c1; ++ci) {
            T* d = gp + ci * h * w;
            const T* g = go + ci * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              std::size_t y0, y1;
              T fy;
              src_coord(oy, factor, h, y0, y1, fy);
              for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t x0, x1;
                T fx;
                src_coord(ox, factor, w, x0, x1, fx);
                const T gv = g[oy * ow + ox];
                d[y0 * w + x0] += (T(1) - fy) * (T(1) - fx) * gv;
                d[y0 * w + x1] += (T(1) - fy) * fx * gv;
                d[y1 * w + x0] += fy * (T(1) - fx) * gv;
                d[y1 * w + x1] += fy * fx * gv;
              }
            }
          }
        },
        1);
  });
  return out;
}

namespace {

// Shared 1-d linear sampling helper: value and d(value)/d(t) of buf[t] with
// edge clamping; buf elements are at stride `stride`.
template <class T>
inline void lerp1d(const T* buf, std::size_t n, std::size_t stride, T t_raw, T& val, T& dval_dt,
                   std::size_t& lo, T& fr) {
  const T tmax = T(n - 1);
  const T t = std::min(std::max(t_raw, T(0)), tmax);
  lo = n == 1 ? 0 : std::min(std::size_t(t), n - 2);
  fr = t - T(lo);
  const T a = buf[lo * stride];
  const T b = n == 1 ? a : buf[(lo + 1) * stride];
  val = (T(1) - fr) * a + fr * b;
  dval_dt = (t_raw > T(0) && t_raw < tmax && n > 1) ? (b - a) : T(0);
}

}  // namespace

template <class T>
TensorT<T> sample_volume_linear(const TensorT<T>& vol, const TensorT<T>& disp, std::size_t radius) {
  if (vol.ndim() != 3 || disp.ndim() != 2 || vol.extent(1) != disp.extent(0) ||
      vol.extent(2) != disp.extent(1)) {
    throw ShapeError("sample_volume_linear: vol " + shape_str(vol.shape()) + " vs disp " +
                     shape_str(disp.shape()));
  }
  const std::size_t dbins = vol.extent(0), h = vol.extent(1), w = vol.extent(2);
  const std::size_t taps = 2 * radius + 1;
  auto out = TensorT<T>::make_uninit({taps, h, w});

  const T* pv = vol.data();
  const T* pd = disp.data();
  T* po = out.data();
  const std::size_t hw = h * w;
  parallel_for(
      hw,
      [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
          const T base = pd[p];
          for (std::size_t j = 0; j < taps; ++j) {
            const T t = base + T(std::int64_t(j) - std::int64_t(radius));
            T val, dv;
            std::size_t lo;
            T fr;
            lerp1d(pv + p, dbins, hw, t, val, dv, lo, fr);
            po[j * hw + p] = val;
          }
        }
      },
      512);

  autograd_attach<T>(out, {vol, disp}, [=](Node<T>& self) {
    Node<T>& pvol = *self.parents[0];
    Node<T>& pdisp = *self.parents[1];
    const T* go = self.grad.data();
    const T* vv = pvol.value.data();
    const T* dd = pdisp.value.data();
    T* gvol = pvol.requires_grad ? pvol.grad_acc() : nullptr;
    T* gdisp = pdisp.requires_grad ? pdisp.grad_acc() : nullptr;
    parallel_for(
        hw,
        [&](std::size_t p0, std::size_t p1) {
          for (std::size_t p = p0; p < p1; ++p) {
            const T base = dd[p];
            for (std::size_t j = 0; j < taps; ++j) {
              const T t = base + T(std::int64_t(j) - std::int64_t(radius));
              T val, dv;
              std::size_t lo;
              T fr;
              lerp1d(vv + p, dbins, hw, t, val, dv, lo, fr);
              const T g = go[j * hw + p];
              if (gvol) {
                gvol[lo * hw + p] += (T(1) - fr) * g;
                if (dbins > 1) gvol[(lo + 1) * hw + p] += fr * g;
              }
              if (gdisp) gdisp[p] += g * dv;
            }
          }
        },
        512);
  });
  return out;
}

template <class T>
TensorT<T> sample_corr_linear(const TensorT<T>& corr, const TensorT<T>& disp, std::size_t radius) {
  if (corr.ndim() != 3 || disp.ndim() != 2 || corr.extent(0) != disp.extent(0) ||
      corr.extent(1) != disp.extent(1)) {
    throw ShapeError("sample_corr_linear: corr " + shape_str(corr.shape()) + " vs disp " +
                     shape_str(disp.shape()));
  }
  const std::size_t h = corr.extent(0), w = corr.extent(1), wr = corr.extent(2);
  const std::size_t taps = 2 * radius + 1;
  auto out = TensorT<T>::make_uninit({taps, h, w});

  const T* pc = corr.data();
  const T* pd = disp.data();
  T* po = out.data();
  parallel_for(
      h * w,
      [&](std::size_t p0, std::size_t p1) {
        for (std::size_t p = p0; p < p1; ++p) {
          const std::size_t y = p / w, x = p % w;
          const T* row = pc + (y * w + x) * wr;
          for (std::size_t j = 0; j < taps; ++j) {
            const T t = T(x) - (pd[p] + T(std::int64_t(j) - std::int64_t(radius)));
            T val, dv;
            std::size_t lo;
            T fr;
            lerp1d(row, wr, 1, t, val, dv, lo, fr);
            po[j * h * w + p] = val;
          }
        }
      },
      512);

  autograd_attach<T>(out, {corr, disp}, [=](Node<T>& self) {
    Node<T>& pcorr = *self.parents[0];
    Node<T>& pdisp = *self.parents[1];
    const T* go = self.grad.data();
    const T* cv = pcorr.value.data();
    const T* dd = pdisp.value.data();
    T* gcorr = pcorr.requires_grad ? pcorr.grad_acc() : nullptr;
    T* gdisp = pdisp.requires_grad ? pdisp.grad_acc() : nullptr;
    parallel_for(
        h * w,
        [&](std::size_t p0, std::size_t p1) {
          for (std::size_t p = p0; p < p1; ++p) {
            const std::size_t y = p / w, x = p % w;
            const T* row = cv + (y * w + x) * wr;
            for (std::size_t j = 0; j < taps; ++j) {
              const T t = T(x) - (dd[p] + T(std::int64_t(j) - std::int64_t(radius)));
              T val, dv;
              std::size_t lo;
              T fr;
              lerp1d(row, wr, 1, t, val, dv, lo, fr);
              const T g = go[j * h * w + p];
              if (gcorr) {
                gcorr[(y * w + x) * wr + lo] += (T(1) - fr) * g;
                if (wr > 1) gcorr[(y * w + x) * wr + lo + 1] += fr * g;
              }
              // t depends on disp with slope -1
              if (gdisp) gdisp[p] -= g * dv;
            }
          }
        },
        512);
  });
  return out;
}

// ------------------------------------------------------------ instantiation

#define STEREO_INSTANTIATE_OPS(T)                                                                  \
  template TensorT<T> reshape<T>(const TensorT<T>&, Shape);                                        \
  template TensorT<T> permute<T>(const TensorT<T>&, const std::vector<std::size_t>&);              \
  template TensorT<T> slice<T>(const TensorT<T>&, std::size_t, std::size_t, std::size_t);          \
  template TensorT<T> concat<T>(const std::vector<TensorT<T>>&, std::size_t);                      \
  template TensorT<T> expand<T>(const TensorT<T>&, std::size_t, std::size_t);                      \
  template TensorT<T> pixel_shuffle2d<T>(const TensorT<T>&, std::size_t);                          \
  template TensorT<T> roll2d<T>(const TensorT<T>&, std::int64_t, std::int64_t);                    \
  template TensorT<T> add<T>(const TensorT<T>&, const TensorT<T>&);                                \
  template TensorT<T> sub<T>(const TensorT<T>&, const TensorT<T>&);                                \
  template TensorT<T> mul<T>(const TensorT<T>&, const TensorT<T>&);                                \
  template TensorT<T> div_<T>(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> neg<T>(const TensorT<T>&);                                                   \
  template TensorT<T> scalar_mul<T>(const TensorT<T>&, T);                                         \
  template TensorT<T> scalar_add<T>(const TensorT<T>&, T);                                         \
  template TensorT<T> exp_<T>(const TensorT<T>&);                                                  \
  template TensorT<T> log_<T>(const TensorT<T>&);                                                  \
  template TensorT<T> sqrt_<T>(const TensorT<T>&);                                                 \
  template TensorT<T> abs_<T>(const TensorT<T>&);                                                  \
  template TensorT<T> tanh_<T>(const TensorT<T>&);                                                 \
  template TensorT<T> sigmoid<T>(const TensorT<T>&);                                               \
  template TensorT<T> gelu<T>(const TensorT<T>&);                                                  \
  template TensorT<T> relu<T>(const TensorT<T>&);                                                  \
  template TensorT<T> leaky_relu<T>(const TensorT<T>&, T);                                         \
  template TensorT<T> smooth_l1<T>(const TensorT<T>&, const TensorT<T>&);                          \
  template TensorT<T> sum_all<T>(const TensorT<T>&);                                               \
  template TensorT<T> mean_all<T>(const TensorT<T>&);                                              \
  template TensorT<T> sum_axis<T>(const TensorT<T>&, std::size_t, bool);                           \
  template TensorT<T> masked_mean<T>(const TensorT<T>&, const TensorT<T>&);                        \
  template TensorT<T> matmul<T>(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> linear<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&);          \
  template TensorT<T> softmax<T>(const TensorT<T>&, std::size_t);                                  \
  template TensorT<T> layer_norm<T>(const TensorT<T>&, std::size_t, const TensorT<T>&,             \
                                    const TensorT<T>&, T);                                         \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,           \
                                std::size_t, std::size_t);                                         \
  template TensorT<T> conv3d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,           \
                                std::size_t);                                                      \
  template TensorT<T> conv_transpose3d_k2s2<T>(const TensorT<T>&, const TensorT<T>&,               \
                                               const TensorT<T>&, std::size_t, std::size_t,        \
                                               std::size_t);                                       \
  template TensorT<T> unfold2d<T>(const TensorT<T>&, std::size_t, std::size_t);                    \
  template TensorT<T> fold2d<T>(const TensorT<T>&, std::size_t, std::size_t, std::size_t,          \
                                std::size_t, bool);                                               \
  template TensorT<T> upsample_bilinear2d<T>(const TensorT<T>&, std::size_t);                      \
  template TensorT<T> sample_volume_linear<T>(const TensorT<T>&, const TensorT<T>&, std::size_t);  \
  template TensorT<T> sample_corr_linear<T>(const TensorT<T>&, const TensorT<T>&, std::size_t);

STEREO_INSTANTIATE_OPS(float)
STEREO_INSTANTIATE_OPS(double)

#undef STEREO_INSTANTIATE_OPS

}  // namespace stereo

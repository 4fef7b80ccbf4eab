#pragma once

#include <cstdint>
#include <vector>

#include "stereo/tensor.hpp"

namespace stereo {

// Primitive tensor operations. Every function here builds a fresh graph node
// and registers a reverse-mode gradient unless noted otherwise. Elementwise
// binary ops require exactly matching shapes; the only implicit broadcasting
// anywhere is over leading batch extents in matmul.

// ---------------------------------------------------------------- shape
template <class T> TensorT<T> reshape(const TensorT<T>& x, Shape shape);
template <class T> TensorT<T> permute(const TensorT<T>& x, const std::vector<std::size_t>& dims);
template <class T> TensorT<T> slice(const TensorT<T>& x, std::size_t axis, std::size_t start,
                                    std::size_t len);
template <class T> TensorT<T> concat(const std::vector<TensorT<T>>& xs, std::size_t axis);
/// Repeats a size-1 axis n times (materialised; gradient sums back).
template <class T> TensorT<T> expand(const TensorT<T>& x, std::size_t axis, std::size_t n);
/// [C*r*r, H, W] -> [C, H*r, W*r] depth-to-space.
template <class T> TensorT<T> pixel_shuffle2d(const TensorT<T>& x, std::size_t r);
/// Circular shift of the two trailing spatial axes of a [C, H, W] tensor.
template <class T> TensorT<T> roll2d(const TensorT<T>& x, std::int64_t shift_h,
                                     std::int64_t shift_w);

// ----------------------------------------------------------- elementwise
template <class T> TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> div_(const TensorT<T>& a, const TensorT<T>& b);
template <class T> TensorT<T> neg(const TensorT<T>& x);
template <class T> TensorT<T> scalar_mul(const TensorT<T>& x, T s);
template <class T> TensorT<T> scalar_add(const TensorT<T>& x, T s);
template <class T> TensorT<T> exp_(const TensorT<T>& x);
template <class T> TensorT<T> log_(const TensorT<T>& x);
template <class T> TensorT<T> sqrt_(const TensorT<T>& x);
template <class T> TensorT<T> abs_(const TensorT<T>& x);
template <class T> TensorT<T> tanh_(const TensorT<T>& x);
template <class T> TensorT<T> sigmoid(const TensorT<T>& x);
/// Exact erf-based GELU.
template <class T> TensorT<T> gelu(const TensorT<T>& x);
template <class T> TensorT<T> relu(const TensorT<T>& x);
template <class T> TensorT<T> leaky_relu(const TensorT<T>& x, T slope);
/// Elementwise smooth-L1 of (a - b), quadratic below |d| = 1.
template <class T> TensorT<T> smooth_l1(const TensorT<T>& a, const TensorT<T>& b);

// ------------------------------------------------------------ reductions
template <class T> TensorT<T> sum_all(const TensorT<T>& x);
template <class T> TensorT<T> mean_all(const TensorT<T>& x);
template <class T> TensorT<T> sum_axis(const TensorT<T>& x, std::size_t axis, bool keepdim);
/// Mean of x over positions where mask != 0. The mask carries no gradient.
template <class T> TensorT<T> masked_mean(const TensorT<T>& x, const TensorT<T>& mask);

// ---------------------------------------------------------------- nn ops
/// Batched matrix product; leading extents broadcast where equal or one.
template <class T> TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);
/// x [..., In] * w [Out, In]^T + b [Out]; pass a default-constructed b to skip.
template <class T> TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w,
                                     const TensorT<T>& b);
/// Max-subtracted softmax along one axis. NaN input raises NumericError.
template <class T> TensorT<T> softmax(const TensorT<T>& x, std::size_t axis);
template <class T> TensorT<T> layer_norm(const TensorT<T>& x, std::size_t axis,
                                         const TensorT<T>& gamma, const TensorT<T>& beta, T eps);
/// x [Cin,H,W], w [Cout,Cin,kh,kw] (odd kernels), explicit stride/padding.
template <class T> TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                                     std::size_t stride, std::size_t padding);
/// x [Cin,D,H,W], w [Cout,Cin,kd,kh,kw] (odd kernels), same-padding k/2.
template <class T> TensorT<T> conv3d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                                     std::size_t stride);
/// Kernel-2 stride-2 transposed conv; w [Cin,Cout,2,2,2]; output cropped to
/// the requested extents (each either 2*in or 2*in-1).
template <class T> TensorT<T> conv_transpose3d_k2s2(const TensorT<T>& x, const TensorT<T>& w,
                                                    const TensorT<T>& b, std::size_t out_d,
                                                    std::size_t out_h, std::size_t out_w);
/// [C,H,W] -> [C*k*k, L] patches around every output location, zero pad k/2.
template <class T> TensorT<T> unfold2d(const TensorT<T>& x, std::size_t k, std::size_t stride);
/// Inverse of unfold2d (stride 1); sums overlaps, optionally dividing by the
/// per-position overlap count.
template <class T> TensorT<T> fold2d(const TensorT<T>& cols, std::size_t channels, std::size_t h,
                                     std::size_t w, std::size_t k, bool normalize);
template <class T> TensorT<T> upsample_bilinear2d(const TensorT<T>& x, std::size_t factor);
/// vol [D,H,W], disp [H,W] -> [(2r+1),H,W]; linear interpolation along the
/// disparity axis at disp + delta, edge-clamped; gradients reach both inputs.
template <class T> TensorT<T> sample_volume_linear(const TensorT<T>& vol, const TensorT<T>& disp,
                                                   std::size_t radius);
/// corr [H,W,W'], disp [H,W] -> [(2r+1),H,W]; samples corr(y, x, x-disp-delta).
template <class T> TensorT<T> sample_corr_linear(const TensorT<T>& corr, const TensorT<T>& disp,
                                                 std::size_t radius);

}  // namespace stereo

#pragma once

#include <algorithm>
#include <cstddef>

#include "stereo/threading.hpp"

namespace stereo {

// Row-major dense kernels. All accumulate (C +=) and walk k in ascending
// order within each output row, so results are invariant to the worker count.

/// C[M,N] += A[M,K] * B[K,N]
template <class T>
inline void gemm_nn(const T* A, const T* B, T* C, std::size_t M, std::size_t K, std::size_t N) {
  const std::size_t row_flops = 2 * K * N + 1;
  const std::size_t min_rows = std::max<std::size_t>(1, 32768 / row_flops);
  parallel_for(
      M,
      [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
          T* c = C + i * N;
          const T* a = A + i * K;
          std::size_t k = 0;
          for (; k + 4 <= K; k += 4) {
            const T a0 = a[k], a1 = a[k + 1], a2 = a[k + 2], a3 = a[k + 3];
            const T* b0 = B + k * N;
            const T* b1 = b0 + N;
            const T* b2 = b1 + N;
            const T* b3 = b2 + N;
            for (std::size_t j = 0; j < N; ++j) {
              c[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
          }
          for (; k < K; ++k) {
            const T ak = a[k];
            const T* b = B + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += ak * b[j];
          }
        }
      },
      min_rows);
}

/// dst[C,R] = src[R,C]
template <class T>
inline void transpose2d(const T* src, T* dst, std::size_t R, std::size_t C) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < R; r0 += kTile) {
    const std::size_t r1 = std::min(R, r0 + kTile);
    for (std::size_t c0 = 0; c0 < C; c0 += kTile) {
      const std::size_t c1 = std::min(C, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * R + r] = src[r * C + c];
      }
    }
  }
}

/// y += a * x
template <class T>
inline void axpy(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace stereo

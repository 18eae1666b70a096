#include "setfeat/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace setfeat::kernels {

namespace {

constexpr std::size_t kMr = 8;

// One 512-bit vector of T; the compiler lowers it to whatever the target has.
template <class T>
using Vec [[gnu::vector_size(64)]] = T;

template <class T>
constexpr std::size_t kLanes = 64 / sizeof(T);

// Column panel width: two vectors per row of the micro tile.
template <class T>
constexpr std::size_t kNr = 2 * kLanes<T>;

// Depth of one packed slice; keeps a B panel slice in L1.
constexpr std::size_t kKc = 256;

// Below this many multiply-adds a gemm stays on the calling thread.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

bool may_fork(std::size_t work) { return work >= kParallelWork && !omp_in_parallel(); }

template <class T>
T* scratch(std::vector<T>& buf, std::size_t n) {
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

// A rows [0, m) x depth [k0, k0+kc), row blocks of kMr interleaved along k:
// ap[(blk*kc + p)*kMr + r]. Rows past m are zero.
template <class T>
void pack_a(Trans ta, std::size_t m, std::size_t k0, std::size_t kc, const T* a, std::size_t lda, T* ap) {
  const std::size_t blocks = (m + kMr - 1) / kMr;
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t rows = std::min(kMr, m - blk * kMr);
    T* dst = ap + blk * kc * kMr;
    if (rows < kMr) std::fill(dst, dst + kc * kMr, T{0});
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = blk * kMr + r;
      if (ta == Trans::no) {
        const T* src = a + i * lda + k0;
        for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = src[p];
      } else {
        const T* src = a + k0 * lda + i;
        for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = src[p * lda];
      }
    }
  }
}

// B depth [k0, k0+kc) x columns [0, n) in panels of kNr: bp[(panel*kc + p)*kNr + j].
template <class T>
void pack_b(Trans tb, std::size_t n, std::size_t k0, std::size_t kc, const T* b, std::size_t ldb, T* bp) {
  constexpr std::size_t nr = kNr<T>;
  const std::size_t panels = (n + nr - 1) / nr;
  for (std::size_t pan = 0; pan < panels; ++pan) {
    const std::size_t cols = std::min(nr, n - pan * nr);
    T* dst = bp + pan * kc * nr;
    if (tb == Trans::no) {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = b + (k0 + p) * ldb + pan * nr;
        T* row = dst + p * nr;
        std::copy(src, src + cols, row);
        std::fill(row + cols, row + nr, T{0});
      }
    } else {
      if (cols < nr) std::fill(dst, dst + kc * nr, T{0});
      for (std::size_t j = 0; j < cols; ++j) {
        const T* src = b + (pan * nr + j) * ldb + k0;
        for (std::size_t p = 0; p < kc; ++p) dst[p * nr + j] = src[p];
      }
    }
  }
}

template <class T>
T element(Trans t, const T* x, std::size_t ld, std::size_t row, std::size_t col) {
  return t == Trans::no ? x[row * ld + col] : x[col * ld + row];
}

template <class T>
Vec<T> load(const T* p) {
  Vec<T> v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

template <class T>
void micro_tile(const T* ap, const T* bp, std::size_t k, T* acc) {
  constexpr std::size_t L = kLanes<T>;
  Vec<T> c0[kMr] = {}, c1[kMr] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const Vec<T> b0 = load(bp + p * 2 * L), b1 = load(bp + p * 2 * L + L);
    const T* a = ap + p * kMr;
#pragma GCC unroll 8
    for (std::size_t r = 0; r < kMr; ++r) {
      c0[r] += a[r] * b0;
      c1[r] += a[r] * b1;
    }
  }
  for (std::size_t r = 0; r < kMr; ++r) {
    __builtin_memcpy(acc + r * 2 * L, &c0[r], sizeof(Vec<T>));
    __builtin_memcpy(acc + r * 2 * L + L, &c1[r], sizeof(Vec<T>));
  }
}

}  // namespace

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == T{0} ? T{0} : beta * c[i * ldc + j];
    return;
  }
  constexpr std::size_t nr = kNr<T>;
  thread_local std::vector<T> abuf, bbuf;
  const std::size_t row_blocks = (m + kMr - 1) / kMr;
  const std::size_t panels = (n + nr - 1) / nr;
  const auto tiles = static_cast<long>(row_blocks * panels);
  const bool fork = may_fork(m * n * k);

  for (std::size_t k0 = 0; k0 < k; k0 += kKc) {
    const std::size_t kc = std::min(kKc, k - k0);
    T* ap = scratch(abuf, row_blocks * kMr * kc);
    T* bp = scratch(bbuf, panels * nr * kc);
    pack_a(ta, m, k0, kc, a, lda, ap);
    pack_b(tb, n, k0, kc, b, ldb, bp);
    const T keep = k0 == 0 ? beta : T{1};

#pragma omp parallel for schedule(static) if (fork)
    for (long t = 0; t < tiles; ++t) {
      const std::size_t blk = static_cast<std::size_t>(t) / panels;
      const std::size_t pan = static_cast<std::size_t>(t) % panels;
      alignas(64) T acc[kMr * nr];
      micro_tile(ap + blk * kc * kMr, bp + pan * kc * nr, kc, acc);
      const std::size_t rows = std::min(kMr, m - blk * kMr);
      const std::size_t cols = std::min(nr, n - pan * nr);
      for (std::size_t r = 0; r < rows; ++r) {
        T* crow = c + (blk * kMr + r) * ldc + pan * nr;
        const T* arow = acc + r * nr;
        if (keep == T{0}) {
          for (std::size_t j = 0; j < cols; ++j) crow[j] = alpha * arow[j];
        } else {
          for (std::size_t j = 0; j < cols; ++j) crow[j] = alpha * arow[j] + keep * crow[j];
        }
      }
    }
  }
}

template <class T>
void im2col3x3(const T* image, std::size_t channels, std::size_t height, std::size_t width, T* col) {
  const std::size_t plane = height * width;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const T* src = image + ch * plane;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* dst = col + (ch * 9 + ky * 3 + kx) * plane;
        // output column x reads source column x + kx - 1
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? width - 1 : width;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          T* drow = dst + y * width;
          if (sy < 0 || sy >= static_cast<long>(height)) {
            std::fill(drow, drow + width, T{0});
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(sy) * width;
          drow[0] = T{0};
          drow[width - 1] = T{0};
          std::copy(srow + x0 + kx - 1, srow + x1 + kx - 1, drow + x0);
        }
      }
    }
  }
}

template <class T>
void col2im3x3(const T* col, std::size_t channels, std::size_t height, std::size_t width, T* image) {
  const std::size_t plane = height * width;
  for (std::size_t ch = 0; ch < channels; ++ch) {
    T* dst = image + ch * plane;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* src = col + (ch * 9 + ky * 3 + kx) * plane;
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? width - 1 : width;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(height)) continue;
          T* drow = dst + static_cast<std::size_t>(sy) * width;
          const T* srow = src + y * width;
          for (std::size_t x = x0; x < x1; ++x) drow[x + kx - 1] += srow[x];
        }
      }
    }
  }
}

template <class T>
void conv2d_forward(const T* input, std::size_t batch, std::size_t in_channels, std::size_t height,
                    std::size_t width, const T* weight, std::size_t out_channels, std::size_t kernel, const T* bias,
                    T* output) {
  const std::size_t plane = height * width;
  const std::size_t patch = in_channels * kernel * kernel;
  const auto items = static_cast<long>(batch);
  const bool fork = batch > 1 && may_fork(batch * out_channels * patch * plane);

#pragma omp parallel if (fork)
  {
    std::vector<T> col(kernel == 3 ? patch * plane : 0);
#pragma omp for schedule(static)
    for (long n = 0; n < items; ++n) {
      const T* x = input + static_cast<std::size_t>(n) * in_channels * plane;
      T* y = output + static_cast<std::size_t>(n) * out_channels * plane;
      const T* rhs = x;
      if (kernel == 3) {
        im2col3x3(x, in_channels, height, width, col.data());
        rhs = col.data();
      }
      gemm(Trans::no, Trans::no, out_channels, plane, patch, T{1}, weight, patch, rhs, plane, T{0}, y, plane);
      if (bias != nullptr)
        for (std::size_t o = 0; o < out_channels; ++o)
          for (std::size_t s = 0; s < plane; ++s) y[o * plane + s] += bias[o];
    }
  }
}

template <class T>
void conv2d_backward(const T* input, std::size_t batch, std::size_t in_channels, std::size_t height,
                     std::size_t width, const T* weight, std::size_t out_channels, std::size_t kernel,
                     const T* grad_output, T* grad_input, T* grad_weight, T* grad_bias) {
  const std::size_t plane = height * width;
  const std::size_t patch = in_channels * kernel * kernel;

  if (grad_bias != nullptr) {
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t o = 0; o < out_channels; ++o) {
        const T* g = grad_output + (n * out_channels + o) * plane;
        T s{0};
        for (std::size_t i = 0; i < plane; ++i) s += g[i];
        grad_bias[o] += s;
      }
  }

  if (grad_weight != nullptr) {
    std::vector<T> col(kernel == 3 ? patch * plane : 0);
    for (std::size_t n = 0; n < batch; ++n) {
      const T* x = input + n * in_channels * plane;
      const T* rhs = x;
      if (kernel == 3) {
        im2col3x3(x, in_channels, height, width, col.data());
        rhs = col.data();
      }
      gemm(Trans::no, Trans::yes, out_channels, patch, plane, T{1}, grad_output + n * out_channels * plane, plane,
           rhs, plane, T{1}, grad_weight, patch);
    }
  }

  if (grad_input != nullptr) {
    const auto items = static_cast<long>(batch);
    const bool fork = batch > 1 && may_fork(batch * out_channels * patch * plane);
#pragma omp parallel if (fork)
    {
      std::vector<T> col(kernel == 3 ? patch * plane : 0);
#pragma omp for schedule(static)
      for (long n = 0; n < items; ++n) {
        const T* g = grad_output + static_cast<std::size_t>(n) * out_channels * plane;
        T* dx = grad_input + static_cast<std::size_t>(n) * in_channels * plane;
        if (kernel == 3) {
          gemm(Trans::yes, Trans::no, patch, plane, out_channels, T{1}, weight, patch, g, plane, T{0}, col.data(),
               plane);
          col2im3x3(col.data(), in_channels, height, width, dx);
        } else {
          gemm(Trans::yes, Trans::no, patch, plane, out_channels, T{1}, weight, patch, g, plane, T{1}, dx, plane);
        }
      }
    }
  }
}

template <class T>
void maxpool2_forward(const T* input, std::size_t planes, std::size_t height, std::size_t width, T* output,
                      std::size_t* argmax) {
  const std::size_t oh = height / 2, ow = width / 2;
  const auto count = static_cast<long>(planes);
#pragma omp parallel for schedule(static) if (may_fork(planes * height * width))
  for (long pl = 0; pl < count; ++pl) {
    const std::size_t base = static_cast<std::size_t>(pl) * height * width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = base + (2 * y) * width + 2 * x;
        const std::size_t cand[3] = {best + 1, best + width, best + width + 1};
        for (std::size_t c : cand)
          if (input[c] > input[best]) best = c;
        const std::size_t o = static_cast<std::size_t>(pl) * oh * ow + y * ow + x;
        output[o] = input[best];
        argmax[o] = best;
      }
    }
  }
}

namespace reference {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += element(ta, a, lda, i, p) * element(tb, b, ldb, p, j);
      c[i * ldc + j] = beta == T{0} ? alpha * s : alpha * s + beta * c[i * ldc + j];
    }
  }
}

template <class T>
void conv2d_forward(const T* input, std::size_t batch, std::size_t in_channels, std::size_t height,
                    std::size_t width, const T* weight, std::size_t out_channels, std::size_t kernel, const T* bias,
                    T* output) {
  const long half = static_cast<long>(kernel / 2);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out_channels; ++o)
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          T s = bias != nullptr ? bias[o] : T{0};
          for (std::size_t ch = 0; ch < in_channels; ++ch)
            for (std::size_t ky = 0; ky < kernel; ++ky)
              for (std::size_t kx = 0; kx < kernel; ++kx) {
                const long sy = static_cast<long>(y + ky) - half;
                const long sx = static_cast<long>(x + kx) - half;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(height) || sx >= static_cast<long>(width)) continue;
                s += input[((n * in_channels + ch) * height + static_cast<std::size_t>(sy)) * width +
                           static_cast<std::size_t>(sx)] *
                     weight[((o * in_channels + ch) * kernel + ky) * kernel + kx];
              }
          output[((n * out_channels + o) * height + y) * width + x] = s;
        }
}

template <class T>
void maxpool2_forward(const T* input, std::size_t planes, std::size_t height, std::size_t width, T* output) {
  for (std::size_t pl = 0; pl < planes; ++pl)
    for (std::size_t y = 0; y < height / 2; ++y)
      for (std::size_t x = 0; x < width / 2; ++x) {
        T best = input[(pl * height + 2 * y) * width + 2 * x];
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) best = std::max(best, input[(pl * height + 2 * y + dy) * width + 2 * x + dx]);
        output[(pl * (height / 2) + y) * (width / 2) + x] = best;
      }
}

}  // namespace reference

#define SETFEAT_INSTANTIATE_KERNELS(T)                                                                               \
  template void gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, T, const T*, std::size_t, const T*,    \
                        std::size_t, T, T*, std::size_t);                                                            \
  template void im2col3x3<T>(const T*, std::size_t, std::size_t, std::size_t, T*);                                 \
  template void col2im3x3<T>(const T*, std::size_t, std::size_t, std::size_t, T*);                                 \
  template void conv2d_forward<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t, const T*,           \
                                  std::size_t, std::size_t, const T*, T*);                                           \
  template void conv2d_backward<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t, const T*,          \
                                   std::size_t, std::size_t, const T*, T*, T*, T*);                                  \
  template void maxpool2_forward<T>(const T*, std::size_t, std::size_t, std::size_t, T*, std::size_t*);            \
  template void reference::gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, T, const T*, std::size_t,   \
                                   const T*, std::size_t, T, T*, std::size_t);                                       \
  template void reference::conv2d_forward<T>(const T*, std::size_t, std::size_t, std::size_t, std::size_t,         \
                                             const T*, std::size_t, std::size_t, const T*, T*);                      \
  template void reference::maxpool2_forward<T>(const T*, std::size_t, std::size_t, std::size_t, T*);

SETFEAT_INSTANTIATE_KERNELS(float)
SETFEAT_INSTANTIATE_KERNELS(double)

#undef SETFEAT_INSTANTIATE_KERNELS

}  // namespace setfeat::kernels

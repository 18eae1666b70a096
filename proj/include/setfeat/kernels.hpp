#pragma once

// Raw compute kernels behind the tensor operations.
//
// The kernels in `setfeat::kernels` are OpenMP-parallel. Every output element
// is produced by exactly one thread with a fixed reduction order, so results
// are bit-identical for any thread count. `setfeat::kernels::reference` holds
// straight-line serial versions used by the tests and the benchmark.

#include <cstddef>
#include <span>

namespace setfeat::kernels {

enum class Trans { no, yes };

/// C = alpha * op(A) * op(B) + beta * C, row-major. op(A) is m x k, op(B) is k x n.
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

/// Unfolds one C x H x W image into a (C*9) x (H*W) matrix for a 3x3 same-padded convolution.
template <class T>
void im2col3x3(const T* image, std::size_t channels, std::size_t height, std::size_t width, T* col);

/// Adjoint of im2col3x3: accumulates `col` back into `image`.
template <class T>
void col2im3x3(const T* col, std::size_t channels, std::size_t height, std::size_t width, T* image);

/// NCHW convolution, stride 1, kernel 1 or 3 (3 is zero-padded to keep the spatial size).
template <class T>
void conv2d_forward(const T* input, std::size_t batch, std::size_t in_channels, std::size_t height,
                    std::size_t width, const T* weight, std::size_t out_channels, std::size_t kernel, const T* bias,
                    T* output);

/// Gradients of conv2d_forward. Accumulates into grad_input / grad_weight / grad_bias when non-null.
template <class T>
void conv2d_backward(const T* input, std::size_t batch, std::size_t in_channels, std::size_t height,
                     std::size_t width, const T* weight, std::size_t out_channels, std::size_t kernel,
                     const T* grad_output, T* grad_input, T* grad_weight, T* grad_bias);

/// 2x2 stride-2 max pooling over N*C planes. `argmax` receives the flat input
/// index of each selected element; ties go to the first element in row-major order.
template <class T>
void maxpool2_forward(const T* input, std::size_t planes, std::size_t height, std::size_t width, T* output,
                      std::size_t* argmax);

namespace reference {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, std::size_t lda,
          const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);

/// Direct seven-loop convolution.
template <class T>
void conv2d_forward(const T* input, std::size_t batch, std::size_t in_channels, std::size_t height,
                    std::size_t width, const T* weight, std::size_t out_channels, std::size_t kernel, const T* bias,
                    T* output);

template <class T>
void maxpool2_forward(const T* input, std::size_t planes, std::size_t height, std::size_t width, T* output);

}  // namespace reference

}  // namespace setfeat::kernels

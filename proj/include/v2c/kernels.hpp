#pragma once

// Dense inner loops shared by the forward and backward passes.
//
// Every kernel exists twice: a serial reference in kernels::serial and an
// OpenMP version in kernels::parallel. The parallel version splits only the
// loop over output elements, so each output element sees the same sequence
// of floating-point additions as in the reference and the two agree bit for
// bit at any thread count. The unqualified kernels::* entry points dispatch
// on the configured thread count.

#include <cstddef>
#include <span>

namespace v2c::kernels {

// Dimensions of a same-padded temporal convolution.
struct ConvDims {
  std::size_t frames;  // T
  std::size_t in;      // d_in
  std::size_t out;     // d_out
  std::size_t width;   // odd kernel width
};

#define V2C_KERNEL_DECLS                                                                           \
  /* y[r] += sum_c W[r,c] * x[c] */                                                                \
  void gemv(std::span<const double> W, std::size_t rows, std::size_t cols,                        \
            std::span<const double> x, std::span<double> y);                                      \
  /* gx[c] += sum_r W[r,c] * gy[r] */                                                              \
  void gemv_t(std::span<const double> W, std::size_t rows, std::size_t cols,                      \
              std::span<const double> gy, std::span<double> gx);                                  \
  /* gW[r,c] += gy[r] * x[c] */                                                                    \
  void ger(std::span<const double> gy, std::span<const double> x, std::span<double> gW);          \
  /* Y[t,o] = b[o] + sum_{j,i} X[t+j-w/2, i] * K[j,i,o], zero outside [0,T) */                     \
  void conv_forward(const ConvDims& d, std::span<const double> X, std::span<const double> K,      \
                    std::span<const double> b, std::span<double> Y);                              \
  void conv_backward_input(const ConvDims& d, std::span<const double> K,                          \
                           std::span<const double> gY, std::span<double> gX);                     \
  void conv_backward_kernel(const ConvDims& d, std::span<const double> X,                         \
                            std::span<const double> gY, std::span<double> gK);

namespace serial {
V2C_KERNEL_DECLS
}

namespace parallel {
V2C_KERNEL_DECLS
}

V2C_KERNEL_DECLS

#undef V2C_KERNEL_DECLS

// gb[o] += sum_t gY[t,o]
void conv_backward_bias(const ConvDims& d, std::span<const double> gY, std::span<double> gb);

// Thread count for the dispatching entry points; 1 selects the serial reference.
void set_threads(int n);
int threads();

}  // namespace v2c::kernels

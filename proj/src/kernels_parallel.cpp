#include <omp.h>

#include "v2c/kernels.hpp"

namespace v2c::kernels {

namespace {
int g_threads = 1;
constexpr std::size_t kColumnBlock = 64;
}  // namespace

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }
int threads() { return g_threads; }

namespace parallel {

void gemv(std::span<const double> W, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    const double* w = W.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] += acc;
  }
}

void gemv_t(std::span<const double> W, std::size_t rows, std::size_t cols, std::span<const double> gy,
            std::span<double> gx) {
  const auto blocks = static_cast<std::ptrdiff_t>((cols + kColumnBlock - 1) / kColumnBlock);
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t c0 = blk * kColumnBlock;
    const std::size_t c1 = std::min(cols, c0 + kColumnBlock);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* w = W.data() + r * cols;
      const double g = gy[r];
      for (std::size_t c = c0; c < c1; ++c) gx[c] += w[c] * g;
    }
  }
}

void ger(std::span<const double> gy, std::span<const double> x, std::span<double> gW) {
  const std::size_t cols = x.size();
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(gy.size()); ++r) {
    double* g = gW.data() + r * cols;
    const double s = gy[r];
    for (std::size_t c = 0; c < cols; ++c) g[c] += s * x[c];
  }
}

void conv_forward(const ConvDims& d, std::span<const double> X, std::span<const double> K,
                  std::span<const double> b, std::span<double> Y) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(d.width / 2);
  const auto T = static_cast<std::ptrdiff_t>(d.frames);
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    double* y = Y.data() + t * d.out;
    for (std::size_t o = 0; o < d.out; ++o) y[o] = b[o];
    for (std::size_t j = 0; j < d.width; ++j) {
      const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(j) - half;
      if (s < 0 || s >= T) continue;
      const double* x = X.data() + s * d.in;
      for (std::size_t i = 0; i < d.in; ++i) {
        const double xv = x[i];
        const double* k = K.data() + (j * d.in + i) * d.out;
        for (std::size_t o = 0; o < d.out; ++o) y[o] += xv * k[o];
      }
    }
  }
}

// Each input frame s gathers from output frames t = s - j + half. Walking j
// downwards visits t in increasing order, matching the reference scatter.
void conv_backward_input(const ConvDims& d, std::span<const double> K, std::span<const double> gY,
                         std::span<double> gX) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(d.width / 2);
  const auto T = static_cast<std::ptrdiff_t>(d.frames);
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::ptrdiff_t s = 0; s < T; ++s) {
    double* gx = gX.data() + s * d.in;
    for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(d.width) - 1; j >= 0; --j) {
      const std::ptrdiff_t t = s - j + half;
      if (t < 0 || t >= T) continue;
      const double* gy = gY.data() + t * d.out;
      for (std::size_t i = 0; i < d.in; ++i) {
        const double* k = K.data() + (j * d.in + i) * d.out;
        double acc = 0.0;
        for (std::size_t o = 0; o < d.out; ++o) acc += gy[o] * k[o];
        gx[i] += acc;
      }
    }
  }
}

void conv_backward_kernel(const ConvDims& d, std::span<const double> X, std::span<const double> gY,
                          std::span<double> gK) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(d.width / 2);
  const auto T = static_cast<std::ptrdiff_t>(d.frames);
  const auto taps = static_cast<std::ptrdiff_t>(d.width * d.in);
#pragma omp parallel for schedule(static) num_threads(g_threads)
  for (std::ptrdiff_t ji = 0; ji < taps; ++ji) {
    const std::ptrdiff_t j = ji / static_cast<std::ptrdiff_t>(d.in);
    const std::size_t i = ji % d.in;
    double* gk = gK.data() + ji * d.out;
    for (std::ptrdiff_t t = 0; t < T; ++t) {
      const std::ptrdiff_t s = t + j - half;
      if (s < 0 || s >= T) continue;
      const double xv = X[s * d.in + i];
      const double* gy = gY.data() + t * d.out;
      for (std::size_t o = 0; o < d.out; ++o) gk[o] += xv * gy[o];
    }
  }
}

}  // namespace parallel

#define V2C_DISPATCH(name, ...) \
  (g_threads > 1 ? parallel::name(__VA_ARGS__) : serial::name(__VA_ARGS__))

void gemv(std::span<const double> W, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
  V2C_DISPATCH(gemv, W, rows, cols, x, y);
}

void gemv_t(std::span<const double> W, std::size_t rows, std::size_t cols, std::span<const double> gy,
            std::span<double> gx) {
  V2C_DISPATCH(gemv_t, W, rows, cols, gy, gx);
}

void ger(std::span<const double> gy, std::span<const double> x, std::span<double> gW) {
  V2C_DISPATCH(ger, gy, x, gW);
}

void conv_forward(const ConvDims& d, std::span<const double> X, std::span<const double> K,
                  std::span<const double> b, std::span<double> Y) {
  V2C_DISPATCH(conv_forward, d, X, K, b, Y);
}

void conv_backward_input(const ConvDims& d, std::span<const double> K, std::span<const double> gY,
                         std::span<double> gX) {
  V2C_DISPATCH(conv_backward_input, d, K, gY, gX);
}

void conv_backward_kernel(const ConvDims& d, std::span<const double> X, std::span<const double> gY,
                          std::span<double> gK) {
  V2C_DISPATCH(conv_backward_kernel, d, X, gY, gK);
}

#undef V2C_DISPATCH

void conv_backward_bias(const ConvDims& d, std::span<const double> gY, std::span<double> gb) {
  for (std::size_t t = 0; t < d.frames; ++t) {
    const double* gy = gY.data() + t * d.out;
    for (std::size_t o = 0; o < d.out; ++o) gb[o] += gy[o];
  }
}

}  // namespace v2c::kernels

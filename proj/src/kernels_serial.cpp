#include "v2c/kernels.hpp"

namespace v2c::kernels::serial {

void gemv(std::span<const double> W, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = W.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] += acc;
  }
}

void gemv_t(std::span<const double> W, std::size_t rows, std::size_t cols, std::span<const double> gy,
            std::span<double> gx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = W.data() + r * cols;
    const double g = gy[r];
    for (std::size_t c = 0; c < cols; ++c) gx[c] += w[c] * g;
  }
}

void ger(std::span<const double> gy, std::span<const double> x, std::span<double> gW) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < gy.size(); ++r) {
    double* g = gW.data() + r * cols;
    const double s = gy[r];
    for (std::size_t c = 0; c < cols; ++c) g[c] += s * x[c];
  }
}

void conv_forward(const ConvDims& d, std::span<const double> X, std::span<const double> K,
                  std::span<const double> b, std::span<double> Y) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(d.width / 2);
  const auto T = static_cast<std::ptrdiff_t>(d.frames);
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

void conv_backward_input(const ConvDims& d, std::span<const double> K, std::span<const double> gY,
                         std::span<double> gX) {
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(d.width / 2);
  const auto T = static_cast<std::ptrdiff_t>(d.frames);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    const double* gy = gY.data() + t * d.out;
    for (std::size_t j = 0; j < d.width; ++j) {
      const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(j) - half;
      if (s < 0 || s >= T) continue;
      double* gx = gX.data() + s * d.in;
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
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    const double* gy = gY.data() + t * d.out;
    for (std::size_t j = 0; j < d.width; ++j) {
      const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(j) - half;
      if (s < 0 || s >= T) continue;
      const double* x = X.data() + s * d.in;
      for (std::size_t i = 0; i < d.in; ++i) {
        const double xv = x[i];
        double* gk = gK.data() + (j * d.in + i) * d.out;
        for (std::size_t o = 0; o < d.out; ++o) gk[o] += xv * gy[o];
      }
    }
  }
}

}  // namespace v2c::kernels::serial

#include "dasc/kernels.hpp"

namespace dasc::kernels::serial {

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,
                    std::span<const double> kernel, std::span<double> y) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t co = 0; co < g.out_c; ++co) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < g.k_h; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride_h + ky) -
                            static_cast<std::ptrdiff_t>(g.pad_top);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            for (std::size_t kx = 0; kx < g.k_w; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride_w + kx) -
                              static_cast<std::ptrdiff_t>(g.pad_left);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
              for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                acc += x[((b * g.in_h + iy) * g.in_w + ix) * g.in_c + ci] *
                       kernel[((ky * g.k_w + kx) * g.in_c + ci) * g.out_c + co];
              }
            }
          }
          y[((b * g.out_h + oy) * g.out_w + ox) * g.out_c + co] = acc;
        }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t ky = 0; ky < g.k_h; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride_h + ky) -
                          static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.k_w; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride_w + kx) -
                            static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            for (std::size_t ci = 0; ci < g.in_c; ++ci) {
              double acc = 0.0;
              for (std::size_t co = 0; co < g.out_c; ++co) {
                acc += dy[((b * g.out_h + oy) * g.out_w + ox) * g.out_c + co] *
                       kernel[((ky * g.k_w + kx) * g.in_c + ci) * g.out_c + co];
              }
              dx[((b * g.in_h + iy) * g.in_w + ix) * g.in_c + ci] += acc;
            }
          }
        }
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dkernel) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t ky = 0; ky < g.k_h; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride_h + ky) -
                          static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.k_w; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride_w + kx) -
                            static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            for (std::size_t ci = 0; ci < g.in_c; ++ci)
              for (std::size_t co = 0; co < g.out_c; ++co) {
                dkernel[((ky * g.k_w + kx) * g.in_c + ci) * g.out_c + co] +=
                    x[((b * g.in_h + iy) * g.in_w + ix) * g.in_c + ci] *
                    dy[((b * g.out_h + oy) * g.out_w + ox) * g.out_c + co];
              }
          }
        }
}

void max_pool2d_forward(const Pool2dGeometry& g, std::span<const double> x,
                        std::span<double> y, std::span<std::size_t> argmax) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t c = 0; c < g.channels; ++c) {
          std::size_t best = ((b * g.in_h + oy * g.stride_h) * g.in_w +
                              ox * g.stride_w) * g.channels + c;
          for (std::size_t wy = 0; wy < g.win_h; ++wy)
            for (std::size_t wx = 0; wx < g.win_w; ++wx) {
              const std::size_t idx =
                  ((b * g.in_h + oy * g.stride_h + wy) * g.in_w +
                   ox * g.stride_w + wx) * g.channels + c;
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t o = ((b * g.out_h + oy) * g.out_w + ox) * g.channels + c;
          y[o] = x[best];
          argmax[o] = best;
        }
}

void max_pool2d_backward(const Pool2dGeometry& g, std::span<const double> dy,
                         std::span<const std::size_t> argmax, std::span<double> dx) {
  const std::size_t n = g.batch * g.out_h * g.out_w * g.channels;
  for (std::size_t o = 0; o < n; ++o) dx[argmax[o]] += dy[o];
}

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t j = 0; j < g.out; ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < g.in; ++i) acc += x[r * g.in + i] * w[i * g.out + j];
      y[r * g.out + j] = acc;
    }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> w, std::span<double> dx) {
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t i = 0; i < g.in; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.out; ++j) acc += dy[r * g.out + j] * w[i * g.out + j];
      dx[r * g.in + i] += acc;
    }
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> db) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t i = 0; i < g.in; ++i)
      for (std::size_t j = 0; j < g.out; ++j)
        dw[i * g.out + j] += x[r * g.in + i] * dy[r * g.out + j];
    for (std::size_t j = 0; j < g.out; ++j) db[j] += dy[r * g.out + j];
  }
}

}  // namespace dasc::kernels::serial

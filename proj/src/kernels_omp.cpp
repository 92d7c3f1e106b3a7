#include "dasc/kernels.hpp"

namespace dasc::kernels::omp {

namespace {
using idx_t = std::ptrdiff_t;
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,
                    std::span<const double> kernel, std::span<double> y) {
  const idx_t rows = static_cast<idx_t>(g.batch * g.out_h);
#pragma omp parallel for schedule(static)
  for (idx_t row = 0; row < rows; ++row) {
    const std::size_t b = static_cast<std::size_t>(row) / g.out_h;
    const std::size_t oy = static_cast<std::size_t>(row) % g.out_h;
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* out = &y[((b * g.out_h + oy) * g.out_w + ox) * g.out_c];
      for (std::size_t co = 0; co < g.out_c; ++co) out[co] = 0.0;
      for (std::size_t ky = 0; ky < g.k_h; ++ky) {
        const auto iy = static_cast<idx_t>(oy * g.stride_h + ky) -
                        static_cast<idx_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<idx_t>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < g.k_w; ++kx) {
          const auto ix = static_cast<idx_t>(ox * g.stride_w + kx) -
                          static_cast<idx_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<idx_t>(g.in_w)) continue;
          const double* in = &x[((b * g.in_h + iy) * g.in_w + ix) * g.in_c];
          const double* k = &kernel[(ky * g.k_w + kx) * g.in_c * g.out_c];
          for (std::size_t ci = 0; ci < g.in_c; ++ci) {
            const double v = in[ci];
            const double* kc = k + ci * g.out_c;
            for (std::size_t co = 0; co < g.out_c; ++co) out[co] += v * kc[co];
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx) {
  const idx_t batch = static_cast<idx_t>(g.batch);
#pragma omp parallel for schedule(static)
  for (idx_t bi = 0; bi < batch; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const double* grad = &dy[((b * g.out_h + oy) * g.out_w + ox) * g.out_c];
        for (std::size_t ky = 0; ky < g.k_h; ++ky) {
          const auto iy = static_cast<idx_t>(oy * g.stride_h + ky) -
                          static_cast<idx_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<idx_t>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.k_w; ++kx) {
            const auto ix = static_cast<idx_t>(ox * g.stride_w + kx) -
                            static_cast<idx_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<idx_t>(g.in_w)) continue;
            double* out = &dx[((b * g.in_h + iy) * g.in_w + ix) * g.in_c];
            const double* k = &kernel[(ky * g.k_w + kx) * g.in_c * g.out_c];
            for (std::size_t ci = 0; ci < g.in_c; ++ci) {
              const double* kc = k + ci * g.out_c;
              double acc = 0.0;
              for (std::size_t co = 0; co < g.out_c; ++co) acc += grad[co] * kc[co];
              out[ci] += acc;
            }
          }
        }
      }
  }
}

void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dkernel) {
  // Each thread owns whole (ky, kx, ci) rows of the kernel gradient and sums
  // over the batch in ascending order.
  const idx_t taps = static_cast<idx_t>(g.k_h * g.k_w * g.in_c);
#pragma omp parallel for schedule(static)
  for (idx_t tap = 0; tap < taps; ++tap) {
    const std::size_t t = static_cast<std::size_t>(tap);
    const std::size_t ci = t % g.in_c;
    const std::size_t kx = (t / g.in_c) % g.k_w;
    const std::size_t ky = t / (g.in_c * g.k_w);
    double* dk = &dkernel[t * g.out_c];
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const auto iy = static_cast<idx_t>(oy * g.stride_h + ky) -
                        static_cast<idx_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<idx_t>(g.in_h)) continue;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const auto ix = static_cast<idx_t>(ox * g.stride_w + kx) -
                          static_cast<idx_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<idx_t>(g.in_w)) continue;
          const double v = x[((b * g.in_h + iy) * g.in_w + ix) * g.in_c + ci];
          const double* grad = &dy[((b * g.out_h + oy) * g.out_w + ox) * g.out_c];
          for (std::size_t co = 0; co < g.out_c; ++co) dk[co] += v * grad[co];
        }
      }
  }
}

void max_pool2d_forward(const Pool2dGeometry& g, std::span<const double> x,
                        std::span<double> y, std::span<std::size_t> argmax) {
  const idx_t batch = static_cast<idx_t>(g.batch);
#pragma omp parallel for schedule(static)
  for (idx_t bi = 0; bi < batch; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
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
}

void max_pool2d_backward(const Pool2dGeometry& g, std::span<const double> dy,
                         std::span<const std::size_t> argmax, std::span<double> dx) {
  const std::size_t per_row = g.out_h * g.out_w * g.channels;
  const idx_t batch = static_cast<idx_t>(g.batch);
#pragma omp parallel for schedule(static)
  for (idx_t bi = 0; bi < batch; ++bi) {
    const std::size_t begin = static_cast<std::size_t>(bi) * per_row;
    for (std::size_t o = begin; o < begin + per_row; ++o) dx[argmax[o]] += dy[o];
  }
}

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y) {
  const idx_t rows = static_cast<idx_t>(g.rows);
#pragma omp parallel for schedule(static)
  for (idx_t ri = 0; ri < rows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    double* out = &y[r * g.out];
    for (std::size_t j = 0; j < g.out; ++j) out[j] = b[j];
    for (std::size_t i = 0; i < g.in; ++i) {
      const double v = x[r * g.in + i];
      const double* wi = &w[i * g.out];
      for (std::size_t j = 0; j < g.out; ++j) out[j] += v * wi[j];
    }
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> w, std::span<double> dx) {
  const idx_t rows = static_cast<idx_t>(g.rows);
#pragma omp parallel for schedule(static)
  for (idx_t ri = 0; ri < rows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const double* grad = &dy[r * g.out];
    for (std::size_t i = 0; i < g.in; ++i) {
      const double* wi = &w[i * g.out];
      double acc = 0.0;
      for (std::size_t j = 0; j < g.out; ++j) acc += grad[j] * wi[j];
      dx[r * g.in + i] += acc;
    }
  }
}

void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> db) {
  const idx_t in = static_cast<idx_t>(g.in);
#pragma omp parallel for schedule(static)
  for (idx_t ii = 0; ii < in; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* dwi = &dw[i * g.out];
    for (std::size_t r = 0; r < g.rows; ++r) {
      const double v = x[r * g.in + i];
      const double* grad = &dy[r * g.out];
      for (std::size_t j = 0; j < g.out; ++j) dwi[j] += v * grad[j];
    }
  }
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t j = 0; j < g.out; ++j) db[j] += dy[r * g.out + j];
}

}  // namespace dasc::kernels::omp

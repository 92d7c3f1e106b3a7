#pragma once

// Raw compute kernels behind the differentiable primitives.
//
// Every kernel exists twice: a plain serial reference in `serial::` and an
// OpenMP version in `omp::`. Both walk the reduction in the same order per
// output element, so results are identical regardless of thread count. The
// parallel loops only ever split across independent outputs (batch rows for
// forward and input gradients, parameter entries for weight gradients).
//
// Forward kernels overwrite their output. Backward kernels accumulate (+=).

#include <cstddef>
#include <cstdint>
#include <span>

#include "dasc/tensor.hpp"

namespace dasc::kernels {

enum class Padding { same, valid };

struct Conv2dGeometry {
  std::size_t batch = 0;
  std::size_t in_h = 0, in_w = 0, in_c = 0;
  std::size_t k_h = 0, k_w = 0, out_c = 0;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_top = 0, pad_left = 0;
  std::size_t out_h = 0, out_w = 0;
};

/// x: [batch, H, W, Cin], kernel: [kh, kw, Cin, Cout]. Throws ConfigError
/// naming both shapes when they are incompatible.
Conv2dGeometry conv2d_geometry(const Shape& x, const Shape& kernel,
                               std::size_t stride_h, std::size_t stride_w,
                               Padding padding);

struct Pool2dGeometry {
  std::size_t batch = 0;
  std::size_t in_h = 0, in_w = 0, channels = 0;
  std::size_t win_h = 0, win_w = 0;
  std::size_t stride_h = 0, stride_w = 0;
  std::size_t out_h = 0, out_w = 0;
};

Pool2dGeometry pool2d_geometry(const Shape& x, std::size_t win_h,
                               std::size_t win_w, std::size_t stride_h,
                               std::size_t stride_w);

struct DenseGeometry {
  std::size_t rows = 0, in = 0, out = 0;
};

namespace serial {

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,
                    std::span<const double> kernel, std::span<double> y);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dkernel);

// argmax receives the flat input index chosen for every output element.
void max_pool2d_forward(const Pool2dGeometry& g, std::span<const double> x,
                        std::span<double> y, std::span<std::size_t> argmax);
void max_pool2d_backward(const Pool2dGeometry& g, std::span<const double> dy,
                         std::span<const std::size_t> argmax, std::span<double> dx);

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y);
void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> w, std::span<double> dx);
void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> db);

}  // namespace serial

namespace omp {

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,
                    std::span<const double> kernel, std::span<double> y);
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx);
void conv2d_backward_kernel(const Conv2dGeometry& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dkernel);

void max_pool2d_forward(const Pool2dGeometry& g, std::span<const double> x,
                        std::span<double> y, std::span<std::size_t> argmax);
void max_pool2d_backward(const Pool2dGeometry& g, std::span<const double> dy,
                         std::span<const std::size_t> argmax, std::span<double> dx);

void dense_forward(const DenseGeometry& g, std::span<const double> x,
                   std::span<const double> w, std::span<const double> b,
                   std::span<double> y);
void dense_backward_input(const DenseGeometry& g, std::span<const double> dy,
                          std::span<const double> w, std::span<double> dx);
void dense_backward_params(const DenseGeometry& g, std::span<const double> x,
                           std::span<const double> dy, std::span<double> dw,
                           std::span<double> db);

}  // namespace omp

/// Sets the OpenMP team size used by the `omp::` kernels.
void set_num_threads(int n);
int num_threads();

/// Honors DASC_THREADS when set; returns the resulting thread count.
int configure_threads_from_env();

}  // namespace dasc::kernels

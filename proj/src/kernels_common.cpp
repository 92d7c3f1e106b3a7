#include <cstdlib>
#include <string>

#include "dasc/errors.hpp"
#include "dasc/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dasc::kernels {

Conv2dGeometry conv2d_geometry(const Shape& x, const Shape& kernel,
                               std::size_t stride_h, std::size_t stride_w,
                               Padding padding) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("conv2d: " + why + " (input " + shape_to_string(x) +
                      ", kernel " + shape_to_string(kernel) + ")");
  };
  if (x.size() != 4) fail("input must be [batch, H, W, Cin]");
  if (kernel.size() != 4) fail("kernel must be [kh, kw, Cin, Cout]");
  if (x[3] != kernel[2]) fail("input channels do not match kernel channels");
  if (stride_h == 0 || stride_w == 0) fail("stride must be positive");

  Conv2dGeometry g;
  g.batch = x[0];
  g.in_h = x[1];
  g.in_w = x[2];
  g.in_c = x[3];
  g.k_h = kernel[0];
  g.k_w = kernel[1];
  g.out_c = kernel[3];
  g.stride_h = stride_h;
  g.stride_w = stride_w;

  if (padding == Padding::valid) {
    if (g.k_h > g.in_h || g.k_w > g.in_w) fail("kernel larger than input");
    g.out_h = (g.in_h - g.k_h) / stride_h + 1;
    g.out_w = (g.in_w - g.k_w) / stride_w + 1;
  } else {
    g.out_h = (g.in_h + stride_h - 1) / stride_h;
    g.out_w = (g.in_w + stride_w - 1) / stride_w;
    const std::size_t need_h = (g.out_h - 1) * stride_h + g.k_h;
    const std::size_t need_w = (g.out_w - 1) * stride_w + g.k_w;
    const std::size_t total_h = need_h > g.in_h ? need_h - g.in_h : 0;
    const std::size_t total_w = need_w > g.in_w ? need_w - g.in_w : 0;
    if (g.k_h > g.in_h + total_h || g.k_w > g.in_w + total_w) {
      fail("kernel larger than padded input");
    }
    g.pad_top = total_h / 2;
    g.pad_left = total_w / 2;
  }
  return g;
}

Pool2dGeometry pool2d_geometry(const Shape& x, std::size_t win_h,
                               std::size_t win_w, std::size_t stride_h,
                               std::size_t stride_w) {
  if (x.size() != 4) {
    throw ConfigError("max_pool2d: input must be [batch, H, W, C], got " +
                      shape_to_string(x));
  }
  if (win_h == 0 || win_w == 0 || stride_h == 0 || stride_w == 0) {
    throw ConfigError("max_pool2d: window and stride must be positive");
  }
  if (win_h > x[1] || win_w > x[2]) {
    throw ConfigError("max_pool2d: window " + std::to_string(win_h) + "x" +
                      std::to_string(win_w) + " larger than input " +
                      shape_to_string(x));
  }
  Pool2dGeometry g;
  g.batch = x[0];
  g.in_h = x[1];
  g.in_w = x[2];
  g.channels = x[3];
  g.win_h = win_h;
  g.win_w = win_w;
  g.stride_h = stride_h;
  g.stride_w = stride_w;
  g.out_h = (g.in_h - win_h) / stride_h + 1;
  g.out_w = (g.in_w - win_w) / stride_w + 1;
  return g;
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("DASC_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n <= 0) throw ConfigError("DASC_THREADS must be a positive integer");
      set_num_threads(n);
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("DASC_THREADS is not an integer: ") + env);
    }
  }
  return num_threads();
}

}  // namespace dasc::kernels

#include "dasc/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dasc/errors.hpp"

namespace dasc::ag {

// ---------------------------------------------------------------- Tape

Var Tape::constant(Tensor value) {
  return record("constant", std::move(value), {}, nullptr);
}

Var Tape::input(Tensor value) {
  Var v = record("input", std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = grad_enabled_;
  return v;
}

Var Tape::parameter(Parameter& param) {
  Var v = record("parameter", param.value, {}, nullptr);
  if (grad_enabled_) {
    nodes_[v.id].requires_grad = true;
    nodes_[v.id].param = &param;
  }
  return v;
}

Var Tape::parameter(const Parameter& param) {
  if (grad_enabled_) {
    throw ConfigError("parameter " + param.name + " is read-only on a recording tape");
  }
  return constant(param.value);
}

double Tape::scalar(Var v) const {
  const auto& t = value(v);
  if (t.size() != 1) {
    throw ConfigError("expected a scalar, got shape " + shape_to_string(t.shape()));
  }
  return t[0];
}

Tensor Tape::grad(Var v) const {
  const auto& n = nodes_.at(v.id);
  return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

Tensor& Tape::grad_slot(Var v) {
  auto& n = nodes_.at(v.id);
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op));
  }
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && needs;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  const auto& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw ConfigError("backward needs a scalar loss, got shape " +
                      shape_to_string(root.value.shape()));
  }
  if (!std::isfinite(root.value[0])) {
    throw NumericError("non-finite loss: " + std::to_string(root.value[0]));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!root.requires_grad) return;
  grad_slot(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param != nullptr) {
      auto& dst = n.param->grad;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

// ---------------------------------------------------------------- primitives

namespace {

void check_rank(const Tensor& t, std::size_t rank, std::string_view op) {
  if (t.rank() != rank) {
    throw ConfigError(std::string(op) + ": expected rank " + std::to_string(rank) +
                      ", got shape " + shape_to_string(t.shape()));
  }
}

}  // namespace

Var conv2d(Tape& t, Var x, Var kernel, const Conv2dOptions& opts) {
  const auto g = kernels::conv2d_geometry(t.value(x).shape(), t.value(kernel).shape(),
                                          opts.stride_h, opts.stride_w, opts.padding);
  Tensor y({g.batch, g.out_h, g.out_w, g.out_c});
  kernels::omp::conv2d_forward(g, t.value(x).values(), t.value(kernel).values(), y.values());
  return t.record("conv2d", std::move(y), {x, kernel},
                  [x, kernel, g](Tape& tape, const Tensor&, const Tensor& dy) {
                    if (tape.requires_grad(x)) {
                      kernels::omp::conv2d_backward_input(
                          g, dy.values(), tape.value(kernel).values(), tape.grad_slot(x).values());
                    }
                    if (tape.requires_grad(kernel)) {
                      kernels::omp::conv2d_backward_kernel(
                          g, tape.value(x).values(), dy.values(), tape.grad_slot(kernel).values());
                    }
                  });
}

Var bias_add(Tape& t, Var x, Var bias) {
  const auto& xv = t.value(x);
  const auto& bv = t.value(bias);
  if (bv.rank() != 1 || xv.rank() == 0 || xv.shape().back() != bv.size()) {
    throw ConfigError("bias_add: bias " + shape_to_string(bv.shape()) +
                      " does not match last axis of " + shape_to_string(xv.shape()));
  }
  const std::size_t c = bv.size();
  Tensor y = xv;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % c];
  return t.record("bias_add", std::move(y), {x, bias},
                  [x, bias, c](Tape& tape, const Tensor&, const Tensor& dy) {
                    if (tape.requires_grad(x)) {
                      auto& dx = tape.grad_slot(x);
                      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
                    }
                    if (tape.requires_grad(bias)) {
                      auto& db = tape.grad_slot(bias);
                      for (std::size_t i = 0; i < dy.size(); ++i) db[i % c] += dy[i];
                    }
                  });
}

Var max_pool2d(Tape& t, Var x, std::pair<std::size_t, std::size_t> window,
               std::pair<std::size_t, std::size_t> stride) {
  const auto g = kernels::pool2d_geometry(t.value(x).shape(), window.first, window.second,
                                          stride.first, stride.second);
  Tensor y({g.batch, g.out_h, g.out_w, g.channels});
  std::vector<std::size_t> argmax(y.size());
  kernels::omp::max_pool2d_forward(g, t.value(x).values(), y.values(), argmax);
  return t.record("max_pool2d", std::move(y), {x},
                  [x, g, argmax = std::move(argmax)](Tape& tape, const Tensor&, const Tensor& dy) {
                    kernels::omp::max_pool2d_backward(g, dy.values(), argmax,
                                                      tape.grad_slot(x).values());
                  });
}

Var global_avg_pool(Tape& t, Var x) {
  const auto& xv = t.value(x);
  check_rank(xv, 4, "global_avg_pool");
  const std::size_t rows = xv.extent(0), cells = xv.extent(1) * xv.extent(2),
                    c = xv.extent(3);
  Tensor y({rows, c});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t p = 0; p < cells; ++p)
      for (std::size_t k = 0; k < c; ++k) y[r * c + k] += xv[(r * cells + p) * c + k];
  const double inv = 1.0 / static_cast<double>(cells);
  for (auto& v : y.values()) v *= inv;
  return t.record("global_avg_pool", std::move(y), {x},
                  [x, rows, cells, c, inv](Tape& tape, const Tensor&, const Tensor& dy) {
                    auto& dx = tape.grad_slot(x);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t p = 0; p < cells; ++p)
                        for (std::size_t k = 0; k < c; ++k)
                          dx[(r * cells + p) * c + k] += dy[r * c + k] * inv;
                  });
}

Var dense(Tape& t, Var x, Var w, Var b) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  const auto& bv = t.value(b);
  const bool single = xv.rank() == 1;
  if ((xv.rank() != 1 && xv.rank() != 2) || wv.rank() != 2 || bv.rank() != 1 ||
      xv.shape().back() != wv.extent(0) || bv.size() != wv.extent(1)) {
    throw ConfigError("dense: shape mismatch (x " + shape_to_string(xv.shape()) + ", W " +
                      shape_to_string(wv.shape()) + ", b " + shape_to_string(bv.shape()) + ")");
  }
  kernels::DenseGeometry g{single ? 1 : xv.extent(0), wv.extent(0), wv.extent(1)};
  Tensor y(single ? Shape{g.out} : Shape{g.rows, g.out});
  kernels::omp::dense_forward(g, xv.values(), wv.values(), bv.values(), y.values());
  return t.record("dense", std::move(y), {x, w, b},
                  [x, w, b, g](Tape& tape, const Tensor&, const Tensor& dy) {
                    if (tape.requires_grad(x)) {
                      kernels::omp::dense_backward_input(g, dy.values(), tape.value(w).values(),
                                                         tape.grad_slot(x).values());
                    }
                    if (tape.requires_grad(w) || tape.requires_grad(b)) {
                      Tensor dw_scratch, db_scratch;
                      auto dw = tape.requires_grad(w)
                                    ? tape.grad_slot(w).values()
                                    : (dw_scratch = Tensor::zeros_like(tape.value(w))).values();
                      auto db = tape.requires_grad(b)
                                    ? tape.grad_slot(b).values()
                                    : (db_scratch = Tensor::zeros_like(tape.value(b))).values();
                      kernels::omp::dense_backward_params(g, tape.value(x).values(), dy.values(),
                                                          dw, db);
                    }
                  });
}

Var relu(Tape& t, Var x) {
  Tensor y = t.value(x);
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return t.record("relu", std::move(y), {x}, [x](Tape& tape, const Tensor&, const Tensor& dy) {
    const auto& xv = tape.value(x);
    auto& dx = tape.grad_slot(x);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (xv[i] > 0.0) dx[i] += dy[i];
    }
  });
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() == 0 || logits.shape().back() < 2) {
    throw ConfigError("softmax needs at least 2 classes, got shape " +
                      shape_to_string(logits.shape()));
  }
  if (!logits.all_finite()) throw NumericError("softmax: non-finite logits");
  const std::size_t n = logits.shape().back();
  const std::size_t rows = logits.size() / n;
  Tensor y = logits;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data() + r * n;
    const double shift = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      row[k] = std::exp(row[k] - shift);
      total += row[k];
    }
    for (std::size_t k = 0; k < n; ++k) row[k] /= total;
  }
  return y;
}

Var softmax(Tape& t, Var logits) {
  Tensor y = softmax_rows(t.value(logits));
  const std::size_t n = y.shape().back();
  return t.record("softmax", std::move(y), {logits},
                  [logits, n](Tape& tape, const Tensor& yv, const Tensor& dy) {
                    auto& dx = tape.grad_slot(logits);
                    const std::size_t rows = yv.size() / n;
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t k = 0; k < n; ++k) dot += dy[r * n + k] * yv[r * n + k];
                      for (std::size_t k = 0; k < n; ++k)
                        dx[r * n + k] += yv[r * n + k] * (dy[r * n + k] - dot);
                    }
                  });
}

Tensor layer_norm_rows(const Tensor& z, double eps) {
  if (z.rank() == 0 || z.shape().back() < 2) {
    throw ConfigError("layer_norm needs at least 2 features, got shape " +
                      shape_to_string(z.shape()));
  }
  const std::size_t n = z.shape().back();
  const std::size_t rows = z.size() / n;
  Tensor y = z;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data() + r * n;
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += row[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) var += (row[k] - mean) * (row[k] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < n; ++k) row[k] = (row[k] - mean) * inv;
  }
  return y;
}

Var layer_norm(Tape& t, Var z, double eps) {
  Tensor y = layer_norm_rows(t.value(z), eps);
  const std::size_t n = y.shape().back();
  return t.record("layer_norm", std::move(y), {z},
                  [z, n, eps](Tape& tape, const Tensor& yv, const Tensor& dy) {
                    const auto& zv = tape.value(z);
                    auto& dz = tape.grad_slot(z);
                    const std::size_t rows = yv.size() / n;
                    const double dn = static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double* zr = zv.data() + r * n;
                      double mean = 0.0;
                      for (std::size_t k = 0; k < n; ++k) mean += zr[k];
                      mean /= dn;
                      double var = 0.0;
                      for (std::size_t k = 0; k < n; ++k) var += (zr[k] - mean) * (zr[k] - mean);
                      var /= dn;
                      const double inv = 1.0 / std::sqrt(var + eps);
                      double mean_dy = 0.0, mean_dy_y = 0.0;
                      for (std::size_t k = 0; k < n; ++k) {
                        mean_dy += dy[r * n + k];
                        mean_dy_y += dy[r * n + k] * yv[r * n + k];
                      }
                      mean_dy /= dn;
                      mean_dy_y /= dn;
                      for (std::size_t k = 0; k < n; ++k) {
                        dz[r * n + k] +=
                            inv * (dy[r * n + k] - mean_dy - yv[r * n + k] * mean_dy_y);
                      }
                    }
                  });
}

Var apply_mask(Tape& t, Var z, const Tensor& mask) {
  const auto& zv = t.value(z);
  if (mask.shape() != zv.shape()) {
    throw ConfigError("apply_mask: mask " + shape_to_string(mask.shape()) +
                      " does not match embedding " + shape_to_string(zv.shape()));
  }
  Tensor y = zv;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return t.record("apply_mask", std::move(y), {z}, [z, mask](Tape& tape, const Tensor&, const Tensor& dy) {
    auto& dz = tape.grad_slot(z);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (mask[i] != 0.0) dz[i] += dy[i] * mask[i];
    }
  });
}

Var sum(Tape& t, Var x) {
  double total = 0.0;
  for (double v : t.value(x).values()) total += v;
  return t.record("sum", Tensor({1}, total), {x}, [x](Tape& tape, const Tensor&, const Tensor& dy) {
    auto& dx = tape.grad_slot(x);
    for (auto& v : dx.values()) v += dy[0];
  });
}

Var weighted_sum(Tape& t, Var x, const Tensor& weights) {
  const auto& xv = t.value(x);
  if (weights.shape() != xv.shape()) {
    throw ConfigError("weighted_sum: weights " + shape_to_string(weights.shape()) +
                      " do not match " + shape_to_string(xv.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i] * weights[i];
  return t.record("weighted_sum", Tensor({1}, total), {x},
                  [x, weights](Tape& tape, const Tensor&, const Tensor& dy) {
                    auto& dx = tape.grad_slot(x);
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[0] * weights[i];
                  });
}

Var add(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw ConfigError("add: shape mismatch " + shape_to_string(av.shape()) + " vs " +
                      shape_to_string(bv.shape()));
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return t.record("add", std::move(y), {a, b}, [a, b](Tape& tape, const Tensor&, const Tensor& dy) {
    for (Var v : {a, b}) {
      if (!tape.requires_grad(v)) continue;
      auto& d = tape.grad_slot(v);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  });
}

Var scale(Tape& t, Var a, double factor) {
  Tensor y = t.value(a);
  for (auto& v : y.values()) v *= factor;
  return t.record("scale", std::move(y), {a}, [a, factor](Tape& tape, const Tensor&, const Tensor& dy) {
    auto& d = tape.grad_slot(a);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * factor;
  });
}

}  // namespace dasc::ag

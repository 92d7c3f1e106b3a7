#pragma once

// Minimal tensor-level reverse-mode differentiation.
//
// A Tape records every primitive evaluated during a forward pass together
// with a closure that maps the output gradient onto its inputs. backward()
// replays the closures in reverse order. Parameter leaves are bound to a
// ParamStore entry and add their gradient into Parameter::grad, so repeated
// backward passes accumulate until the store is zeroed.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dasc/kernels.hpp"
#include "dasc/param_store.hpp"
#include "dasc/tensor.hpp"

namespace dasc::ag {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape;
using BackwardFn =
    std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

class Tape {
 public:
  /// With gradients disabled, parameters are recorded as constants and no
  /// backward closures are kept (evaluation mode).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Var constant(Tensor value);
  /// Leaf whose gradient is retained and readable through grad().
  Var input(Tensor value);
  Var parameter(Parameter& param);
  /// Read-only binding; only valid when gradients are disabled.
  Var parameter(const Parameter& param);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  /// Gradient of the last backward() w.r.t. v (zeros if v was not reached).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse pass from a scalar. Throws NumericError before writing any
  /// gradient if the loss is not finite.
  void backward(Var loss);

  // --- for primitive implementations ---
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  /// Accumulation target for an input's gradient; allocated on first use.
  Tensor& grad_slot(Var v);

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;  // stable references across record()
};

struct Conv2dOptions {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  kernels::Padding padding = kernels::Padding::same;
};

/// x: [rows, H, W, Cin], kernel: [kh, kw, Cin, Cout] -> [rows, H', W', Cout].
Var conv2d(Tape& t, Var x, Var kernel, const Conv2dOptions& opts = {});
/// Adds bias [C] along the last axis of x.
Var bias_add(Tape& t, Var x, Var bias);
/// Per-window maximum; the gradient goes to the row-major-first maximum.
Var max_pool2d(Tape& t, Var x, std::pair<std::size_t, std::size_t> window,
               std::pair<std::size_t, std::size_t> stride);
/// [rows, H, W, C] -> [rows, C].
Var global_avg_pool(Tape& t, Var x);
/// x: [rows, n] or [n], w: [n, m], b: [m].
Var dense(Tape& t, Var x, Var w, Var b);
/// max(0, x); the derivative at exactly 0 is taken as 0.
Var relu(Tape& t, Var x);
/// Row-wise softmax over the last axis, shifted by the row maximum.
Var softmax(Tape& t, Var logits);
/// Row-wise (z - mean) / sqrt(var + eps), population variance, no affine.
Var layer_norm(Tape& t, Var z, double eps);
/// Elementwise product with a constant 0/1 mask of the same shape.
Var apply_mask(Tape& t, Var z, const Tensor& mask);
Var sum(Tape& t, Var x);
/// sum(x * weights) for a constant weight tensor of x's shape.
Var weighted_sum(Tape& t, Var x, const Tensor& weights);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);

// Plain value functions shared by the tape ops and by callers that do not
// need gradients.
Tensor softmax_rows(const Tensor& logits);
Tensor layer_norm_rows(const Tensor& z, double eps);

}  // namespace dasc::ag

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dasc/autograd.hpp"
#include "dasc/key_values.hpp"
#include "dasc/param_store.hpp"
#include "dasc/tensor.hpp"

namespace dasc {

struct ConvLayerSpec {
  std::size_t filters = 0;
  std::size_t kernel = 3;
  bool pool = false;  // 2x2 max-pool, stride 2, after the activation
};

/// Every architectural knob of the core model and heads.
struct ModelConfig {
  std::size_t frames = 431;
  std::size_t bands = 64;
  std::size_t channels = 1;
  std::size_t embedding = 256;  // E; masked configurations train with 2E
  std::size_t scenes = 10;
  std::size_t domains = 3;
  std::vector<ConvLayerSpec> conv = {
      {32, 3, true}, {64, 3, true}, {128, 3, true}, {128, 3, true}, {256, 3, false}};
  std::vector<std::size_t> hidden_dense = {256};
  double norm_eps = 1e-5;
  std::string activation = "relu";

  /// Throws ConfigError when a field violates its invariant or the conv
  /// stack cannot be applied to frames x bands.
  void validate() const;

  /// Same architecture at test-friendly size: T=F=E=8, A=3, D=2.
  static ModelConfig tiny();
};

ModelConfig model_config_from(const KeyValues& kv, ModelConfig defaults = {});
void write_model_config(const ModelConfig& cfg, KeyValues& kv);

enum class MaskKind { plus, minus, all_ones };

std::string_view to_string(MaskKind kind);

/// Block-structured binary embedding mask. `plus` keeps the first half of
/// the embedding, `minus` the second, `all_ones` everything; nothing else
/// can be constructed.
class MaskPattern {
 public:
  static MaskPattern plus(std::size_t size);
  static MaskPattern minus(std::size_t size);
  static MaskPattern all_ones(std::size_t size);
  static MaskPattern make(MaskKind kind, std::size_t size);

  MaskKind kind() const noexcept { return kind_; }
  std::string_view label() const noexcept { return to_string(kind_); }
  std::size_t size() const noexcept { return bits_.size(); }
  std::span<const double> bits() const noexcept { return bits_; }

  friend bool operator==(const MaskPattern&, const MaskPattern&) = default;

 private:
  MaskPattern(MaskKind kind, std::size_t size);

  MaskKind kind_;
  std::vector<double> bits_;
};

/// rows x E tensor of the given per-row masks.
Tensor mask_tensor(std::span<const MaskPattern> masks, std::size_t embedding);

struct Predictions {
  Tensor scene;   // rows x A, each row a distribution
  Tensor domain;  // rows x D
  Tensor z;       // normalized embedding, rows x E
  Tensor z_tilde; // masked embedding
};

struct ForwardVars {
  ag::Var z;
  ag::Var z_tilde;
  ag::Var scene;
  ag::Var domain;
};

/// Core model f (conv stack, dense layers, layer normalization) plus the
/// scene and domain softmax heads. Parameter names:
///   conv{i}.kernel, conv{i}.bias, dense{i}.weight, dense{i}.bias,
///   embed.weight, embed.bias, scene_head.{weight,bias}, domain_head.{weight,bias}
class Model {
 public:
  /// He-uniform initialization from a seeded generator; biases start at zero.
  Model(ModelConfig config, std::size_t embedding_size, std::uint64_t seed);
  /// Adopts existing parameters; names and shapes must match the config.
  Model(ModelConfig config, std::size_t embedding_size, ParamStore params);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t embedding_size() const noexcept { return embedding_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  /// x: rows x T x F x C. Records onto `tape`, binding trainable parameters.
  ForwardVars forward(ag::Tape& tape, ag::Var x, std::span<const MaskPattern> masks);
  /// Normalized embedding only.
  ag::Var embed(ag::Tape& tape, ag::Var x);

  /// Gradient-free forward pass.
  Predictions predict(const Tensor& x, std::span<const MaskPattern> masks) const;
  Tensor embed_values(const Tensor& x) const;

  /// Heads only, applied to an already masked embedding (rows x E).
  Predictions predict_from_embedding(const Tensor& z_tilde) const;

 private:
  void check_input(const Tensor& x) const;
  void check_params() const;

  ModelConfig config_;
  std::size_t embedding_;
  ParamStore params_;
};

}  // namespace dasc

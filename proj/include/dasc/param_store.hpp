#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dasc/tensor.hpp"

namespace dasc {

/// A trainable tensor with its gradient accumulator and Adam moments. All
/// four tensors share one shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;
  Tensor second_moment;
};

/// Named parameters in insertion order. Names are unique; the order is the
/// serialization order.
class ParamStore {
 public:
  Parameter& add(std::string name, Tensor init);

  bool contains(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;

  std::span<Parameter> entries() noexcept { return params_; }
  std::span<const Parameter> entries() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void reset_moments();

  /// Rounds every value to the nearest 32-bit float, the precision stored in
  /// checkpoints, so a saved and reloaded store evaluates identically.
  void round_to_checkpoint_precision();

  /// Values only (gradients and moments are not compared).
  bool same_values(const ParamStore& other) const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kCheckpointMagic = "DASC";
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<char> encode_params(const ParamStore& store);
ParamStore decode_params(std::vector<char> bytes, const std::string& source);

void save_params(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_params(const std::filesystem::path& path);

}  // namespace dasc

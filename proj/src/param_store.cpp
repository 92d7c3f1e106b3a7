#include "dasc/param_store.hpp"

#include <limits>

#include "dasc/binary_io.hpp"
#include "dasc/errors.hpp"

namespace dasc {

Parameter& ParamStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("invalid parameter name length");
  }
  Parameter p;
  p.name = name;
  p.grad = Tensor::zeros_like(init);
  p.first_moment = Tensor::zeros_like(init);
  p.second_moment = Tensor::zeros_like(init);
  p.value = std::move(init);
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

Parameter& ParamStore::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return params_[it->second];
}

const Parameter& ParamStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::reset_moments() {
  for (auto& p : params_) {
    p.first_moment.fill(0.0);
    p.second_moment.fill(0.0);
  }
}

void ParamStore::round_to_checkpoint_precision() {
  for (auto& p : params_)
    for (auto& v : p.value.values()) v = static_cast<double>(static_cast<float>(v));
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name) return false;
    if (!(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

std::vector<char> encode_params(const ParamStore& store) {
  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u16(kCheckpointVersion);
  for (const auto& p : store.entries()) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    const auto& shape = p.value.shape();
    if (shape.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw ConfigError("parameter rank too large: " + p.name);
    }
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto e : shape) {
      if (e > std::numeric_limits<std::uint32_t>::max()) {
        throw ConfigError("parameter extent too large: " + p.name);
      }
      w.u32(static_cast<std::uint32_t>(e));
    }
    for (double v : p.value.values()) w.f32(static_cast<float>(v));
  }
  return w.buffer();
}

ParamStore decode_params(std::vector<char> bytes, const std::string& source) {
  io::ByteReader r(std::move(bytes), source);
  if (r.bytes(4, "magic") != kCheckpointMagic) r.fail("bad checkpoint magic");
  const auto version = r.u16("version");
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  ParamStore store;
  while (!r.at_end()) {
    const auto name_len = r.u16("name length");
    if (name_len == 0) r.fail("empty parameter name");
    auto name = r.bytes(name_len, "name");
    const auto rank = r.u8("rank");
    Shape shape(rank);
    for (auto& e : shape) {
      e = r.u32("extent");
      if (e == 0) r.fail("zero extent in parameter " + name);
    }
    const std::size_t count = shape_size(shape);
    if (r.remaining() / 4 < count) r.fail("truncated values of parameter " + name);
    std::vector<double> values(count);
    for (auto& v : values) v = r.f32("value");
    if (store.contains(name)) r.fail("duplicate parameter " + name);
    store.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return store;
}

void save_params(const ParamStore& store, const std::filesystem::path& path) {
  io::write_file(path, encode_params(store));
}

ParamStore load_params(const std::filesystem::path& path) {
  return decode_params(io::read_file(path), path.string());
}

}  // namespace dasc

#include "dasc/model.hpp"

#include <cmath>
#include <random>

#include "dasc/errors.hpp"

namespace dasc {

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("model config: " + why); };
  if (frames == 0 || bands == 0 || channels == 0) fail("frames, bands and channels must be positive");
  if (embedding < 2 || embedding % 2 != 0) fail("embedding size must be even and >= 2");
  if (scenes < 2) fail("need at least 2 scene classes");
  if (domains < 2) fail("need at least 2 domain classes");
  if (conv.empty()) fail("need at least one convolutional layer");
  if (activation != "relu") fail("unsupported activation '" + activation + "'");
  if (!(norm_eps > 0.0)) fail("norm_eps must be positive");
  std::size_t h = frames, w = bands;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    if (conv[i].filters == 0 || conv[i].kernel == 0) {
      fail("conv layer " + std::to_string(i + 1) + " needs positive filters and kernel");
    }
    if (conv[i].pool) {
      if (h < 2 || w < 2) {
        fail("conv layer " + std::to_string(i + 1) + " pools a " + std::to_string(h) + "x" +
             std::to_string(w) + " map");
      }
      h /= 2;
      w /= 2;
    }
  }
  for (auto width : hidden_dense)
    if (width == 0) fail("dense widths must be positive");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.frames = 8;
  c.bands = 8;
  c.channels = 1;
  c.embedding = 8;
  c.scenes = 3;
  c.domains = 2;
  c.conv = {{2, 3, true}, {3, 3, true}, {3, 3, false}, {4, 3, false}, {4, 3, false}};
  c.hidden_dense = {6};
  return c;
}

ModelConfig model_config_from(const KeyValues& kv, ModelConfig d) {
  ModelConfig c = d;
  c.frames = kv.get_size("frames", d.frames);
  c.bands = kv.get_size("bands", d.bands);
  c.channels = kv.get_size("channels", d.channels);
  c.embedding = kv.get_size("embedding_size", d.embedding);
  c.scenes = kv.get_size("scenes", d.scenes);
  c.domains = kv.get_size("domains", d.domains);
  c.norm_eps = kv.get_double("norm_eps", d.norm_eps);
  c.activation = kv.get("activation").value_or(d.activation);
  c.hidden_dense = kv.get_size_list("dense_hidden", d.hidden_dense);

  std::vector<std::size_t> filters, kernels, pools;
  for (const auto& l : d.conv) {
    filters.push_back(l.filters);
    kernels.push_back(l.kernel);
    pools.push_back(l.pool ? 1 : 0);
  }
  filters = kv.get_size_list("conv_filters", filters);
  kernels = kv.get_size_list("conv_kernels", kernels);
  pools = kv.get_size_list("conv_pool", pools);
  if (kernels.size() == 1 && filters.size() > 1) kernels.resize(filters.size(), kernels[0]);
  if (kernels.size() != filters.size() || pools.size() != filters.size()) {
    throw ConfigError("model config: conv_filters, conv_kernels and conv_pool lengths differ");
  }
  c.conv.clear();
  for (std::size_t i = 0; i < filters.size(); ++i) {
    c.conv.push_back({filters[i], kernels[i], pools[i] != 0});
  }
  c.validate();
  return c;
}

void write_model_config(const ModelConfig& c, KeyValues& kv) {
  std::vector<std::size_t> filters, kernels, pools;
  for (const auto& l : c.conv) {
    filters.push_back(l.filters);
    kernels.push_back(l.kernel);
    pools.push_back(l.pool ? 1 : 0);
  }
  kv.set("frames", std::to_string(c.frames));
  kv.set("bands", std::to_string(c.bands));
  kv.set("channels", std::to_string(c.channels));
  kv.set("embedding_size", std::to_string(c.embedding));
  kv.set("scenes", std::to_string(c.scenes));
  kv.set("domains", std::to_string(c.domains));
  kv.set("conv_filters", join_sizes(filters));
  kv.set("conv_kernels", join_sizes(kernels));
  kv.set("conv_pool", join_sizes(pools));
  kv.set("dense_hidden", join_sizes(c.hidden_dense));
  kv.set("norm_eps", format_double(c.norm_eps));
  kv.set("activation", c.activation);
}

// ---------------------------------------------------------------- masks

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::plus: return "plus";
    case MaskKind::minus: return "minus";
    case MaskKind::all_ones: return "all_ones";
  }
  return "?";
}

MaskPattern::MaskPattern(MaskKind kind, std::size_t size) : kind_(kind), bits_(size, 1.0) {
  if (size == 0) throw ConfigError("mask size must be positive");
  if (kind == MaskKind::all_ones) return;
  if (size % 2 != 0) throw ConfigError("plus/minus masks need an even size, got " + std::to_string(size));
  const std::size_t half = size / 2;
  for (std::size_t i = 0; i < size; ++i) {
    const bool first = i < half;
    bits_[i] = (kind == MaskKind::plus) == first ? 1.0 : 0.0;
  }
}

MaskPattern MaskPattern::plus(std::size_t size) { return {MaskKind::plus, size}; }
MaskPattern MaskPattern::minus(std::size_t size) { return {MaskKind::minus, size}; }
MaskPattern MaskPattern::all_ones(std::size_t size) { return {MaskKind::all_ones, size}; }
MaskPattern MaskPattern::make(MaskKind kind, std::size_t size) { return {kind, size}; }

Tensor mask_tensor(std::span<const MaskPattern> masks, std::size_t embedding) {
  if (masks.empty()) throw ConfigError("no masks given");
  Tensor m({masks.size(), embedding});
  for (std::size_t r = 0; r < masks.size(); ++r) {
    if (masks[r].size() != embedding) {
      throw ConfigError("mask length " + std::to_string(masks[r].size()) +
                        " does not match embedding size " + std::to_string(embedding));
    }
    std::copy(masks[r].bits().begin(), masks[r].bits().end(), m.row(r).begin());
  }
  return m;
}

// ---------------------------------------------------------------- model

namespace {

std::string conv_name(std::size_t i, const char* what) {
  return "conv" + std::to_string(i + 1) + "." + what;
}
std::string dense_name(std::size_t i, const char* what) {
  return "dense" + std::to_string(i + 1) + "." + what;
}

struct ParamShape {
  std::string name;
  Shape shape;
  std::size_t fan_in;  // 0 for biases
};

std::vector<ParamShape> parameter_layout(const ModelConfig& c, std::size_t embedding) {
  std::vector<ParamShape> out;
  std::size_t in_c = c.channels;
  for (std::size_t i = 0; i < c.conv.size(); ++i) {
    const auto& l = c.conv[i];
    out.push_back({conv_name(i, "kernel"), {l.kernel, l.kernel, in_c, l.filters},
                   l.kernel * l.kernel * in_c});
    out.push_back({conv_name(i, "bias"), {l.filters}, 0});
    in_c = l.filters;
  }
  std::size_t width = in_c;
  for (std::size_t i = 0; i < c.hidden_dense.size(); ++i) {
    out.push_back({dense_name(i, "weight"), {width, c.hidden_dense[i]}, width});
    out.push_back({dense_name(i, "bias"), {c.hidden_dense[i]}, 0});
    width = c.hidden_dense[i];
  }
  out.push_back({"embed.weight", {width, embedding}, width});
  out.push_back({"embed.bias", {embedding}, 0});
  out.push_back({"scene_head.weight", {embedding, c.scenes}, embedding});
  out.push_back({"scene_head.bias", {c.scenes}, 0});
  out.push_back({"domain_head.weight", {embedding, c.domains}, embedding});
  out.push_back({"domain_head.bias", {c.domains}, 0});
  return out;
}

template <class Store>
ag::Var core(ag::Tape& t, ag::Var x, const ModelConfig& c, Store& params) {
  ag::Var h = x;
  for (std::size_t i = 0; i < c.conv.size(); ++i) {
    h = ag::conv2d(t, h, t.parameter(params.get(conv_name(i, "kernel"))));
    h = ag::bias_add(t, h, t.parameter(params.get(conv_name(i, "bias"))));
    h = ag::relu(t, h);
    if (c.conv[i].pool) h = ag::max_pool2d(t, h, {2, 2}, {2, 2});
  }
  h = ag::global_avg_pool(t, h);
  for (std::size_t i = 0; i < c.hidden_dense.size(); ++i) {
    h = ag::dense(t, h, t.parameter(params.get(dense_name(i, "weight"))),
                  t.parameter(params.get(dense_name(i, "bias"))));
    h = ag::relu(t, h);
  }
  h = ag::dense(t, h, t.parameter(params.get("embed.weight")), t.parameter(params.get("embed.bias")));
  return ag::layer_norm(t, h, c.norm_eps);
}

template <class Store>
ForwardVars heads(ag::Tape& t, ag::Var z, const Tensor& mask, Store& params) {
  ForwardVars out;
  out.z = z;
  out.z_tilde = ag::apply_mask(t, z, mask);
  out.scene = ag::softmax(
      t, ag::dense(t, out.z_tilde, t.parameter(params.get("scene_head.weight")),
                   t.parameter(params.get("scene_head.bias"))));
  out.domain = ag::softmax(
      t, ag::dense(t, out.z_tilde, t.parameter(params.get("domain_head.weight")),
                   t.parameter(params.get("domain_head.bias"))));
  return out;
}

}  // namespace

Model::Model(ModelConfig config, std::size_t embedding_size, std::uint64_t seed)
    : config_(std::move(config)), embedding_(embedding_size) {
  config_.validate();
  if (embedding_ < 2 || embedding_ % 2 != 0) {
    throw ConfigError("embedding size must be even and >= 2, got " + std::to_string(embedding_));
  }
  std::mt19937_64 rng(seed);
  for (auto& p : parameter_layout(config_, embedding_)) {
    Tensor init(p.shape);
    if (p.fan_in > 0) {
      const double limit = std::sqrt(6.0 / static_cast<double>(p.fan_in));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : init.values()) v = dist(rng);
    }
    params_.add(p.name, std::move(init));
  }
}

Model::Model(ModelConfig config, std::size_t embedding_size, ParamStore params)
    : config_(std::move(config)), embedding_(embedding_size), params_(std::move(params)) {
  config_.validate();
  check_params();
}

void Model::check_params() const {
  const auto layout = parameter_layout(config_, embedding_);
  if (layout.size() != params_.size()) {
    throw ConfigError("checkpoint has " + std::to_string(params_.size()) +
                      " parameters, model expects " + std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& p = params_.entries()[i];
    if (p.name != layout[i].name || p.value.shape() != layout[i].shape) {
      throw ConfigError("parameter " + p.name + " " + shape_to_string(p.value.shape()) +
                        " does not match expected " + layout[i].name + " " +
                        shape_to_string(layout[i].shape));
    }
  }
}

void Model::check_input(const Tensor& x) const {
  const Shape want{config_.frames, config_.bands, config_.channels};
  if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != want) {
    throw ConfigError("model input " + shape_to_string(x.shape()) + " does not match rows x " +
                      shape_to_string(want));
  }
}

ag::Var Model::embed(ag::Tape& tape, ag::Var x) {
  check_input(tape.value(x));
  return core(tape, x, config_, params_);
}

ForwardVars Model::forward(ag::Tape& tape, ag::Var x, std::span<const MaskPattern> masks) {
  check_input(tape.value(x));
  if (masks.size() != tape.value(x).extent(0)) {
    throw ConfigError("got " + std::to_string(masks.size()) + " masks for " +
                      std::to_string(tape.value(x).extent(0)) + " rows");
  }
  const ag::Var z = core(tape, x, config_, params_);
  return heads(tape, z, mask_tensor(masks, embedding_), params_);
}

Predictions Model::predict(const Tensor& x, std::span<const MaskPattern> masks) const {
  check_input(x);
  if (masks.size() != x.extent(0)) {
    throw ConfigError("got " + std::to_string(masks.size()) + " masks for " +
                      std::to_string(x.extent(0)) + " rows");
  }
  ag::Tape tape(false);
  const ag::Var z = core(tape, tape.constant(x), config_, params_);
  const auto v = heads(tape, z, mask_tensor(masks, embedding_), params_);
  return {tape.value(v.scene), tape.value(v.domain), tape.value(v.z), tape.value(v.z_tilde)};
}

Tensor Model::embed_values(const Tensor& x) const {
  check_input(x);
  ag::Tape tape(false);
  return tape.value(core(tape, tape.constant(x), config_, params_));
}

Predictions Model::predict_from_embedding(const Tensor& z_tilde) const {
  if (z_tilde.rank() != 2 || z_tilde.extent(1) != embedding_) {
    throw ConfigError("masked embedding " + shape_to_string(z_tilde.shape()) +
                      " does not match embedding size " + std::to_string(embedding_));
  }
  ag::Tape tape(false);
  const ag::Var zt = tape.constant(z_tilde);
  const Tensor ones(z_tilde.shape(), 1.0);
  const auto v = heads(tape, zt, ones, params_);
  return {tape.value(v.scene), tape.value(v.domain), z_tilde, z_tilde};
}

}  // namespace dasc

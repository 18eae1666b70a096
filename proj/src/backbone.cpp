#include "setfeat/backbone.hpp"

#include <string>

namespace setfeat {

BlockKind parse_block_kind(std::string_view name) {
  if (name == "plain") return BlockKind::plain;
  if (name == "residual") return BlockKind::residual;
  throw ConfigError("unknown block kind '" + std::string(name) + "' (expected plain|residual)");
}

void BackboneConfig::validate() const {
  if (input_channels == 0) throw ConfigError("backbone needs at least one input channel");
  if (blocks.empty()) throw ConfigError("backbone needs at least one block");
  for (const auto& b : blocks)
    if (b.out_channels == 0) throw ConfigError("block channel counts must be positive");
}

void BackboneConfig::validate_input(std::size_t height, std::size_t width) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!blocks[b].downsample) continue;
    if (height % 2 != 0 || width % 2 != 0)
      throw DimensionError("block " + std::to_string(b + 1) + " downsamples an odd extent " + std::to_string(height) +
                           "x" + std::to_string(width));
    height /= 2;
    width /= 2;
  }
}

BackboneConfig BackboneConfig::plain(std::size_t input_channels, std::vector<std::size_t> channels) {
  BackboneConfig cfg;
  cfg.input_channels = input_channels;
  for (auto c : channels) cfg.blocks.push_back({c, BlockKind::plain, true});
  return cfg;
}

std::size_t backbone_param_formula(const BackboneConfig& config) {
  std::size_t total = 0;
  std::size_t in = config.input_channels;
  for (const auto& b : config.blocks) {
    const std::size_t out = b.out_channels;
    total += in * out * 9 + 2 * out;
    if (b.kind == BlockKind::residual) {
      total += out * out * 9 + 2 * out;
      if (in != out) total += in * out + 2 * out;
    }
    in = out;
  }
  return total;
}

template <class T>
Backbone<T>::Backbone(BackboneConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed, 0);
  std::size_t in = config_.input_channels;
  for (const auto& spec : config_.blocks) {
    Block block{spec, {}, std::nullopt};
    const std::size_t out = spec.out_channels;
    block.stages.push_back({Conv2d<T>::make(in, out, 3, false, rng), BatchNorm2d<T>::make(out)});
    if (spec.kind == BlockKind::residual) {
      block.stages.push_back({Conv2d<T>::make(out, out, 3, false, rng), BatchNorm2d<T>::make(out)});
      if (in != out) block.skip = Stage{Conv2d<T>::make(in, out, 1, false, rng), BatchNorm2d<T>::make(out)};
    }
    blocks_.push_back(std::move(block));
    in = out;
  }
}

template <class T>
std::vector<Tensor<T>> Backbone<T>::forward_blocks(const Tensor<T>& x, Mode mode) const {
  if (x.rank() != 4 || x.dim(1) != config_.input_channels)
    throw DimensionError("backbone expects N x " + std::to_string(config_.input_channels) + " x H x W input, got " +
                         to_string(x.shape()));
  std::vector<Tensor<T>> out;
  Tensor<T> h = x;
  for (const auto& block : blocks_) {
    Tensor<T> y = h;
    for (const auto& stage : block.stages) y = ops::relu(stage(y, mode));
    if (block.spec.kind == BlockKind::residual) y = ops::add(y, block.skip ? (*block.skip)(h, mode) : h);
    if (block.spec.downsample) y = ops::maxpool2(y);
    out.push_back(y);
    h = y;
  }
  return out;
}

template <class T>
std::size_t Backbone<T>::count_params() const {
  NamedTensors<T> params, buffers;
  collect(params, buffers);
  return params.scalar_count();
}

template <class T>
void Backbone<T>::collect(NamedTensors<T>& params, NamedTensors<T>& buffers) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b + 1);
    const auto& block = blocks_[b];
    for (std::size_t i = 0; i < block.stages.size(); ++i) {
      block.stages[i].conv.collect(prefix + ".conv" + std::to_string(i + 1), params);
      block.stages[i].bn.collect(prefix + ".bn" + std::to_string(i + 1), params, buffers);
    }
    if (block.skip) {
      block.skip->conv.collect(prefix + ".skip.conv", params);
      block.skip->bn.collect(prefix + ".skip.bn", params, buffers);
    }
  }
}

template class Backbone<float>;
template class Backbone<double>;

}  // namespace setfeat

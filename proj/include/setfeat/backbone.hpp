#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "setfeat/nn.hpp"

namespace setfeat {

enum class BlockKind { plain, residual };

BlockKind parse_block_kind(std::string_view name);

struct BlockSpec {
  std::size_t out_channels = 64;
  BlockKind kind = BlockKind::plain;
  bool downsample = true;  // 2x2 max pool at the end of the block
};

struct BackboneConfig {
  std::size_t input_channels = 3;
  std::vector<BlockSpec> blocks;

  void validate() const;
  /// Throws DimensionError if some downsampling block would see an odd extent.
  void validate_input(std::size_t height, std::size_t width) const;

  static BackboneConfig plain(std::size_t input_channels, std::vector<std::size_t> channels);
};

/// Trainable scalars of a backbone with this configuration (conv weights, BN
/// gamma/beta, residual projections), from the per-layer formula.
std::size_t backbone_param_formula(const BackboneConfig& config);

/// Block-structured convolutional extractor.
///
/// plain block:    conv3x3 (no bias) -> BN -> ReLU [-> maxpool2]
/// residual block: two conv3x3-BN-ReLU stages, plus a skip path that is the
///                 identity, or 1x1 conv + BN when the channel count changes;
///                 the sum is then optionally pooled.
template <class T>
class Backbone {
 public:
  Backbone(BackboneConfig config, std::uint64_t seed);

  /// Activations z_1..z_B after each block.
  std::vector<Tensor<T>> forward_blocks(const Tensor<T>& x, Mode mode) const;

  const BackboneConfig& config() const { return config_; }
  std::size_t block_count() const { return config_.blocks.size(); }
  std::size_t out_channels(std::size_t block) const { return config_.blocks.at(block).out_channels; }
  std::size_t count_params() const;

  void collect(NamedTensors<T>& params, NamedTensors<T>& buffers) const;

  struct Stage {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
    Tensor<T> operator()(const Tensor<T>& x, Mode mode) const { return bn(conv(x), mode); }
  };
  struct Block {
    BlockSpec spec;
    std::vector<Stage> stages;
    std::optional<Stage> skip;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  BackboneConfig config_;
  std::vector<Block> blocks_;
};

extern template class Backbone<float>;
extern template class Backbone<double>;

}  // namespace setfeat

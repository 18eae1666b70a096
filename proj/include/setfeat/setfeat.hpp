#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "setfeat/backbone.hpp"
#include "setfeat/feature_set.hpp"
#include "setfeat/nn.hpp"

namespace setfeat {

/// How q/k/v are parameterised: per-patch FC layers, or 1x1 conv + BN.
enum class AttentionStyle { fc, conv_bn };
enum class ResidualMode { automatic, on, off };

AttentionStyle parse_attention_style(std::string_view name);
ResidualMode parse_residual_mode(std::string_view name);
/// `automatic` resolves to on for conv-bn attention and off for fc attention.
bool resolve_residual(ResidualMode mode, AttentionStyle style);

/// Number of mappers attached after each backbone block.
struct MapperLayout {
  std::vector<std::size_t> per_block;

  std::size_t total() const;
  void validate(std::size_t block_count) const;
};

/// One shallow single-head self-attention mapper over the 1x1 patches of a
/// block activation z (C channels, P = H*W patches):
///
///   beta = softmax(q(z) k(z)^T / sqrt(C))        P x P, row-wise
///   a    = beta v(z) [+ z or projection(z)]      P x D
///   h    = mean of a over the P patches          D
template <class T>
class Mapper {
 public:
  struct Projection {
    Conv2d<T> conv;  // 1x1, with bias
    std::optional<BatchNorm2d<T>> bn;
    Tensor<T> operator()(const Tensor<T>& x, Mode mode) const;
  };

  Mapper(std::size_t channels, std::size_t out_dim, AttentionStyle style, bool residual, Rng& rng);

  /// z: N x C x H x W  ->  N x D
  Tensor<T> forward(const Tensor<T>& z, Mode mode) const;
  /// Attention scores beta: N x P x P.
  Tensor<T> attention(const Tensor<T>& z, Mode mode) const;

  std::size_t channels() const { return channels_; }
  std::size_t out_dim() const { return out_dim_; }
  bool residual() const { return residual_; }

  Projection& query() { return q_; }
  Projection& key() { return k_; }
  Projection& value() { return v_; }
  std::optional<Projection>& residual_projection() { return skip_; }

  void collect(const std::string& prefix, NamedTensors<T>& params, NamedTensors<T>& buffers) const;

 private:
  Tensor<T> scores(const Tensor<T>& z, Mode mode) const;

  std::size_t channels_;
  std::size_t out_dim_;
  bool residual_;
  Projection q_, k_, v_;
  std::optional<Projection> skip_;
};

/// Backbone with attention mappers attached after designated blocks. Produces
/// the feature set {h_1..h_M} of every input image.
template <class T>
class SetFeatExtractor {
 public:
  struct Output {
    std::vector<Tensor<T>> per_mapper;  // M tensors, N x D
    Tensor<T> stacked;                  // N x M x D
  };

  SetFeatExtractor(BackboneConfig backbone, MapperLayout layout, AttentionStyle style, ResidualMode residual,
                   std::uint64_t seed);

  Output extract(const Tensor<T>& x, Mode mode) const;
  Tensor<T> extract_set(const Tensor<T>& x, Mode mode) const { return extract(x, mode).stacked; }

  const Backbone<T>& backbone() const { return backbone_; }
  const MapperLayout& layout() const { return layout_; }
  std::size_t mapper_count() const { return mappers_.size(); }
  std::size_t feature_dim() const;
  const std::vector<MapperId>& mapper_ids() const { return ids_; }
  Mapper<T>& mapper(std::size_t m) { return mappers_.at(m); }
  const Mapper<T>& mapper(std::size_t m) const { return mappers_.at(m); }

  std::size_t count_mapper_params() const;
  std::size_t count_params() const { return backbone_.count_params() + count_mapper_params(); }

  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;
  /// Parameters followed by buffers, the checkpoint content.
  NamedTensors<T> state() const;

 private:
  Backbone<T> backbone_;
  MapperLayout layout_;
  std::vector<Mapper<T>> mappers_;
  std::vector<MapperId> ids_;
};

/// Splits an N x M x D feature tensor into N FeatureSets (f64 copies).
template <class T>
std::vector<FeatureSet> to_feature_sets(const Tensor<T>& stacked, const std::vector<MapperId>& ids);

extern template class Mapper<float>;
extern template class Mapper<double>;
extern template class SetFeatExtractor<float>;
extern template class SetFeatExtractor<double>;

}  // namespace setfeat

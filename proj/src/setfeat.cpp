#include "setfeat/setfeat.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace setfeat {

AttentionStyle parse_attention_style(std::string_view name) {
  if (name == "fc") return AttentionStyle::fc;
  if (name == "conv-bn") return AttentionStyle::conv_bn;
  throw ConfigError("unknown mapper style '" + std::string(name) + "' (expected fc|conv-bn)");
}

ResidualMode parse_residual_mode(std::string_view name) {
  if (name == "auto") return ResidualMode::automatic;
  if (name == "on") return ResidualMode::on;
  if (name == "off") return ResidualMode::off;
  throw ConfigError("unknown residual mode '" + std::string(name) + "' (expected auto|on|off)");
}

bool resolve_residual(ResidualMode mode, AttentionStyle style) {
  if (mode == ResidualMode::automatic) return style == AttentionStyle::conv_bn;
  return mode == ResidualMode::on;
}

std::size_t MapperLayout::total() const { return std::accumulate(per_block.begin(), per_block.end(), std::size_t{0}); }

void MapperLayout::validate(std::size_t block_count) const {
  if (per_block.size() != block_count)
    throw ConfigError("mapper layout has " + std::to_string(per_block.size()) + " entries for " +
                      std::to_string(block_count) + " backbone blocks");
  if (total() == 0) throw ConfigError("mapper layout must place at least one mapper");
}

template <class T>
Tensor<T> Mapper<T>::Projection::operator()(const Tensor<T>& x, Mode mode) const {
  Tensor<T> y = conv(x);
  return bn ? (*bn)(y, mode) : y;
}

template <class T>
Mapper<T>::Mapper(std::size_t channels, std::size_t out_dim, AttentionStyle style, bool residual, Rng& rng)
    : channels_(channels), out_dim_(out_dim), residual_(residual) {
  auto make = [&](std::size_t out) {
    Projection p{Conv2d<T>::make(channels, out, 1, true, rng), std::nullopt};
    if (style == AttentionStyle::conv_bn) p.bn = BatchNorm2d<T>::make(out);
    return p;
  };
  q_ = make(channels);
  k_ = make(channels);
  v_ = make(out_dim);
  if (residual && channels != out_dim)
    skip_ = Projection{Conv2d<T>::make(channels, out_dim, 1, false, rng), BatchNorm2d<T>::make(out_dim)};
}

template <class T>
Tensor<T> Mapper<T>::scores(const Tensor<T>& z, Mode mode) const {
  const std::size_t n = z.dim(0), patches = z.dim(2) * z.dim(3);
  // scaling q (C x P) is cheaper than scaling the P x P logits
  const Tensor<T> q = ops::scale(ops::reshape(q_(z, mode), Shape{n, channels_, patches}),
                                 T{1} / std::sqrt(static_cast<T>(channels_)));
  const Tensor<T> k = ops::reshape(k_(z, mode), Shape{n, channels_, patches});
  // (P x C)(C x P): entry (i, j) = q_i . k_j
  const Tensor<T> logits = ops::matmul(q, k, ops::Trans::yes, ops::Trans::no);
  return ops::softmax(logits, 2);
}

template <class T>
Tensor<T> Mapper<T>::attention(const Tensor<T>& z, Mode mode) const {
  if (z.rank() != 4 || z.dim(1) != channels_)
    throw DimensionError("mapper expects N x " + std::to_string(channels_) + " x H x W, got " + to_string(z.shape()));
  return scores(z, mode);
}

template <class T>
Tensor<T> Mapper<T>::forward(const Tensor<T>& z, Mode mode) const {
  const Tensor<T> beta = attention(z, mode);
  const std::size_t n = z.dim(0), patches = z.dim(2) * z.dim(3);
  const Tensor<T> v = ops::reshape(v_(z, mode), Shape{n, out_dim_, patches});
  // mean_i sum_j v_j beta_ij = sum_j v_j (mean_i beta_ij), so average beta first
  const Tensor<T> weights = ops::reshape(ops::mean_axis(beta, 1), Shape{n, patches, 1});
  Tensor<T> h = ops::reshape(ops::matmul(v, weights), Shape{n, out_dim_});
  if (residual_) {
    const Tensor<T> passthrough = skip_ ? (*skip_)(z, mode) : z;
    h = ops::add(h, ops::mean_axis(ops::reshape(passthrough, Shape{n, out_dim_, patches}), 2));
  }
  return h;
}

template <class T>
void Mapper<T>::collect(const std::string& prefix, NamedTensors<T>& params, NamedTensors<T>& buffers) const {
  auto add = [&](const Projection& p, const std::string& name) {
    p.conv.collect(prefix + "." + name, params);
    if (p.bn) p.bn->collect(prefix + "." + name + ".bn", params, buffers);
  };
  add(q_, "q");
  add(k_, "k");
  add(v_, "v");
  if (skip_) add(*skip_, "skip");
}

template <class T>
SetFeatExtractor<T>::SetFeatExtractor(BackboneConfig backbone, MapperLayout layout, AttentionStyle style,
                                      ResidualMode residual, std::uint64_t seed)
    : backbone_(std::move(backbone), seed), layout_(std::move(layout)) {
  layout_.validate(backbone_.block_count());
  const std::size_t out_dim = backbone_.out_channels(backbone_.block_count() - 1);
  const bool with_residual = resolve_residual(residual, style);
  for (std::size_t b = 0; b < layout_.per_block.size(); ++b) {
    for (std::size_t slot = 0; slot < layout_.per_block[b]; ++slot) {
      Rng rng(seed, 1 + ids_.size());
      mappers_.emplace_back(backbone_.out_channels(b), out_dim, style, with_residual, rng);
      ids_.push_back({b + 1, slot});
    }
  }
}

template <class T>
typename SetFeatExtractor<T>::Output SetFeatExtractor<T>::extract(const Tensor<T>& x, Mode mode) const {
  const std::vector<Tensor<T>> blocks = backbone_.forward_blocks(x, mode);
  Output out;
  std::vector<Tensor<T>> rows;
  const std::size_t n = x.dim(0), d = feature_dim();
  for (std::size_t m = 0; m < mappers_.size(); ++m) {
    Tensor<T> h = mappers_[m].forward(blocks[ids_[m].block - 1], mode);
    rows.push_back(ops::reshape(h, Shape{n, 1, d}));
    out.per_mapper.push_back(std::move(h));
  }
  out.stacked = ops::concat<T>(rows, 1);
  return out;
}

template <class T>
std::size_t SetFeatExtractor<T>::feature_dim() const {
  return backbone_.out_channels(backbone_.block_count() - 1);
}

template <class T>
std::size_t SetFeatExtractor<T>::count_mapper_params() const {
  NamedTensors<T> params, buffers;
  for (std::size_t m = 0; m < mappers_.size(); ++m)
    mappers_[m].collect("mapper" + std::to_string(m + 1), params, buffers);
  return params.scalar_count();
}

template <class T>
NamedTensors<T> SetFeatExtractor<T>::parameters() const {
  NamedTensors<T> params, buffers;
  backbone_.collect(params, buffers);
  for (std::size_t m = 0; m < mappers_.size(); ++m)
    mappers_[m].collect("mapper" + std::to_string(m + 1), params, buffers);
  return params;
}

template <class T>
NamedTensors<T> SetFeatExtractor<T>::buffers() const {
  NamedTensors<T> params, buffers;
  backbone_.collect(params, buffers);
  for (std::size_t m = 0; m < mappers_.size(); ++m)
    mappers_[m].collect("mapper" + std::to_string(m + 1), params, buffers);
  return buffers;
}

template <class T>
NamedTensors<T> SetFeatExtractor<T>::state() const {
  NamedTensors<T> all = parameters();
  for (auto& item : buffers().items) all.items.push_back(std::move(item));
  return all;
}

template <class T>
std::vector<FeatureSet> to_feature_sets(const Tensor<T>& stacked, const std::vector<MapperId>& ids) {
  if (stacked.rank() != 3) throw DimensionError("feature tensor must be N x M x D, got " + to_string(stacked.shape()));
  const std::size_t n = stacked.dim(0), m = stacked.dim(1), d = stacked.dim(2);
  std::vector<FeatureSet> sets;
  sets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureSet fs(m, d);
    for (std::size_t k = 0; k < m * d; ++k) fs.values[k] = static_cast<double>(stacked[i * m * d + k]);
    fs.mapper_ids = ids;
    sets.push_back(std::move(fs));
  }
  return sets;
}

template class Mapper<float>;
template class Mapper<double>;
template class SetFeatExtractor<float>;
template class SetFeatExtractor<double>;
template std::vector<FeatureSet> to_feature_sets(const Tensor<float>&, const std::vector<MapperId>&);
template std::vector<FeatureSet> to_feature_sets(const Tensor<double>&, const std::vector<MapperId>&);

}  // namespace setfeat

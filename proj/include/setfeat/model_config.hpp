#pragma once

#include <cstdint>

#include "setfeat/backbone.hpp"
#include "setfeat/config.hpp"
#include "setfeat/dataset.hpp"
#include "setfeat/engine.hpp"
#include "setfeat/setfeat.hpp"

namespace setfeat {

struct ModelSpec {
  BackboneConfig backbone;
  MapperLayout layout;
  AttentionStyle style = AttentionStyle::fc;
  ResidualMode residual = ResidualMode::automatic;
  std::uint64_t seed = 1;

  template <class T>
  SetFeatExtractor<T> build() const {
    return SetFeatExtractor<T>(backbone, layout, style, residual, seed);
  }
};

/// Backbone and mapper settings; the layout may be all zeros (plain backbone).
ModelSpec model_spec(const Config& config);
Metric metric_from(const Config& config);
SplitManifest split_from(const Config& config);
PretrainSettings pretrain_settings(const Config& config);
MetaSettings meta_settings(const Config& config);
EvalSettings eval_settings(const Config& config);

}  // namespace setfeat

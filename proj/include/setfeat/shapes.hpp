#pragma once

#include <cstddef>
#include <cstdint>

#include "setfeat/dataset.hpp"

namespace setfeat {

inline constexpr std::size_t kShapeFigures = 28;

/// Procedural figures: class k is a regular polygon (or ellipse) whose side
/// count, fill/outline style and aspect ratio derive from k, so at most
/// kShapeFigures classes. Each example is drawn at a random position,
/// rotation, scale and colour on a random dark background, plus Gaussian
/// pixel noise of standard deviation `noise` (in units of full intensity).
struct ShapeGenConfig {
  std::size_t classes = 25;
  std::size_t per_class = 40;
  std::size_t size = 32;
  std::size_t channels = 3;
  double noise = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

PackedDataset gen_shapes(const ShapeGenConfig& config);

}  // namespace setfeat

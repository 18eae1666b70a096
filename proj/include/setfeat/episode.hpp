#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "setfeat/dataset.hpp"
#include "setfeat/rng.hpp"

namespace setfeat {

/// The examples of a set of classes (one split), by global example index.
struct ClassPool {
  std::vector<std::size_t> classes;                // dataset class ids
  std::vector<std::vector<std::size_t>> examples;  // per class, global example indices

  static ClassPool from(const PackedDataset& dataset, std::span<const std::size_t> class_ids);
  /// `classes` classes of `per_class` examples, indexed contiguously.
  static ClassPool uniform(std::size_t classes, std::size_t per_class);

  std::size_t size() const { return classes.size(); }
  std::size_t smallest_class() const;
};

/// One N-way K-shot task. Support and query lists are class-major; the
/// episode label of an entry is the position of its class in `classes`.
struct Episode {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t queries = 0;
  std::vector<std::size_t> classes;  // dataset class ids
  std::vector<std::size_t> support;  // way * shot example indices
  std::vector<std::size_t> query;    // way * queries example indices

  std::vector<std::size_t> support_labels() const;
  std::vector<std::size_t> query_labels() const;
};

/// N classes uniformly without replacement, then K+Q examples of each class
/// without replacement; the first K become support.
Episode sample_episode(const ClassPool& pool, std::size_t way, std::size_t shot, std::size_t queries, Rng& rng);

}  // namespace setfeat

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace setfeat {

/// Which mapper produced a feature row: 1-based backbone block, 0-based slot within it.
struct MapperId {
  std::size_t block = 1;
  std::size_t slot = 0;

  bool operator==(const MapperId&) const = default;
};

/// M feature vectors of a shared dimension D, one row per mapper, in
/// canonical (block-ascending, slot-ascending) order.
struct FeatureSet {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // rows x dim, row-major
  std::vector<MapperId> mapper_ids;

  FeatureSet() = default;
  FeatureSet(std::size_t rows, std::size_t dim) : rows(rows), dim(dim), values(rows * dim, 0.0) {}
  FeatureSet(std::size_t rows, std::size_t dim, std::vector<double> values)
      : rows(rows), dim(dim), values(std::move(values)) {}

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
  double& at(std::size_t i, std::size_t j) { return values[i * dim + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
};

}  // namespace setfeat

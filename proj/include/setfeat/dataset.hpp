#pragma once

// Packed image dataset file ("SFDS"), little-endian:
//
//   magic "SFDS" | u32 version (=1) | u32 classes | u32 height | u32 width | u32 channels
//   classes x u32 example count
//   names block: per class, u16 byte length + UTF-8 name
//   payload: u8 pixels, class-major, then example, row-major, channel-last

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace setfeat {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct PackedDataset {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<std::string> class_names;
  std::vector<std::uint32_t> counts;
  std::vector<std::uint8_t> pixels;

  std::size_t classes() const { return counts.size(); }
  std::size_t image_bytes() const { return static_cast<std::size_t>(height) * width * channels; }
  std::size_t total_examples() const;
  /// Global index of example `index` of class `cls`.
  std::size_t example_index(std::size_t cls, std::size_t index) const;
  std::span<const std::uint8_t> image(std::size_t global_index) const;

  void validate() const;
  bool operator==(const PackedDataset&) const = default;
};

std::vector<std::uint8_t> encode_dataset(const PackedDataset& dataset);
PackedDataset decode_dataset(std::span<const std::uint8_t> bytes);
/// Byte length of everything before the payload.
std::size_t dataset_header_bytes(const PackedDataset& dataset);

void pack_dataset(const std::string& path, const PackedDataset& dataset);
PackedDataset load_dataset(const std::string& path);

/// Three disjoint lists of class ids.
struct SplitManifest {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  void validate(std::size_t classes) const;
  /// Classes [0, train), [train, train+val), [train+val, train+val+test).
  static SplitManifest contiguous(std::size_t train, std::size_t val, std::size_t test);
};

}  // namespace setfeat

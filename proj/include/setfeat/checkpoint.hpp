#pragma once

// Parameter checkpoint file ("SFWT"):
//
//   magic "SFWT" | u32 version (=1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 extents | f32 values
//
// All integers and floats are little-endian. Values are stored as f32 in
// either precision mode.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "setfeat/nn.hpp"

namespace setfeat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

template <class T>
std::vector<CheckpointEntry> snapshot(const NamedTensors<T>& tensors);

/// Copies stored values into `tensors` by name. Every tensor must be present
/// with a matching shape; extra entries are an error as well.
template <class T>
void restore(const NamedTensors<T>& tensors, std::span<const CheckpointEntry> entries);

}  // namespace setfeat

#include "setfeat/dataset.hpp"

#include <limits>
#include <numeric>
#include <set>

#include "setfeat/binary_io.hpp"
#include "setfeat/errors.hpp"

namespace setfeat {

std::size_t PackedDataset::total_examples() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t PackedDataset::example_index(std::size_t cls, std::size_t index) const {
  if (cls >= counts.size() || index >= counts[cls])
    throw IndexError("example (" + std::to_string(cls) + ", " + std::to_string(index) + ") out of range");
  return std::accumulate(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(cls), std::size_t{0}) + index;
}

std::span<const std::uint8_t> PackedDataset::image(std::size_t global_index) const {
  if (global_index >= total_examples()) throw IndexError("image index " + std::to_string(global_index) + " out of range");
  return std::span<const std::uint8_t>(pixels).subspan(global_index * image_bytes(), image_bytes());
}

void PackedDataset::validate() const {
  if (counts.empty()) throw ContractError("dataset has no classes");
  if (class_names.size() != counts.size()) throw ContractError("dataset needs one name per class");
  for (auto c : counts)
    if (c == 0) throw ContractError("every class needs at least one example");
  if (height == 0 || width == 0 || channels == 0) throw ContractError("image extents must be positive");
  if (pixels.size() != total_examples() * image_bytes())
    throw ContractError("payload holds " + std::to_string(pixels.size()) + " bytes, expected " +
                        std::to_string(total_examples() * image_bytes()));
}

std::size_t dataset_header_bytes(const PackedDataset& d) {
  std::size_t n = 4 + 4 * 5 + 4 * d.counts.size();
  for (const auto& name : d.class_names) n += 2 + name.size();
  return n;
}

std::vector<std::uint8_t> encode_dataset(const PackedDataset& d) {
  d.validate();
  io::ByteWriter w;
  w.text("SFDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(d.classes()));
  w.u32(d.height);
  w.u32(d.width);
  w.u32(d.channels);
  for (auto c : d.counts) w.u32(c);
  for (const auto& name : d.class_names) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw ContractError("class name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
  }
  w.bytes(d.pixels);
  return w.take();
}

PackedDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.text(4, "magic") != "SFDS") throw FormatError("bad dataset magic", 0);
  const std::size_t version_at = r.offset();
  if (const auto version = r.u32("version"); version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version), version_at);
  PackedDataset d;
  const std::uint32_t classes = r.u32("class count");
  d.height = r.u32("height");
  d.width = r.u32("width");
  d.channels = r.u32("channels");
  if (classes == 0) throw FormatError("dataset declares zero classes", 8);
  if (classes > r.remaining() / 4) throw FormatError("class count exceeds file size", 8);
  for (std::uint32_t c = 0; c < classes; ++c) {
    const std::size_t at = r.offset();
    d.counts.push_back(r.u32("example count"));
    if (d.counts.back() == 0) throw FormatError("class " + std::to_string(c) + " has zero examples", at);
  }
  for (std::uint32_t c = 0; c < classes; ++c) d.class_names.push_back(r.text(r.u16("name length"), "class name"));
  const std::size_t expected = d.total_examples() * d.image_bytes();
  if (r.remaining() != expected)
    throw FormatError("payload length mismatch: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(r.remaining()),
                      r.offset());
  const auto payload = r.bytes(expected, "payload");
  d.pixels.assign(payload.begin(), payload.end());
  return d;
}

void pack_dataset(const std::string& path, const PackedDataset& dataset) {
  io::write_file(path, encode_dataset(dataset));
}

PackedDataset load_dataset(const std::string& path) { return decode_dataset(io::read_file(path)); }

void SplitManifest::validate(std::size_t classes) const {
  std::set<std::size_t> seen;
  for (const auto* part : {&train, &val, &test})
    for (auto c : *part) {
      if (c >= classes) throw ConfigError("split references class " + std::to_string(c) + " of " + std::to_string(classes));
      if (!seen.insert(c).second) throw ConfigError("class " + std::to_string(c) + " appears in more than one split");
    }
}

SplitManifest SplitManifest::contiguous(std::size_t train, std::size_t val, std::size_t test) {
  SplitManifest s;
  std::size_t next = 0;
  for (std::size_t i = 0; i < train; ++i) s.train.push_back(next++);
  for (std::size_t i = 0; i < val; ++i) s.val.push_back(next++);
  for (std::size_t i = 0; i < test; ++i) s.test.push_back(next++);
  return s;
}

}  // namespace setfeat

#include "setfeat/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_map>

#include "setfeat/binary_io.hpp"

namespace setfeat {

namespace io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace io

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointEntry> entries) {
  io::ByteWriter w;
  w.text("SFWT");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw ContractError("checkpoint name too long");
    if (shape_size(e.shape) != e.values.size()) throw DimensionError("checkpoint entry '" + e.name + "' shape mismatch");
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.text(e.name);
    w.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (auto extent : e.shape) w.u32(static_cast<std::uint32_t>(extent));
    for (float v : e.values) w.f32(v);
  }
  return w.take();
}

std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (r.text(4, "magic") != "SFWT") throw FormatError("bad checkpoint magic", 0);
  const std::size_t version_at = r.offset();
  if (const auto version = r.u32("version"); version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  const std::uint32_t count = r.u32("tensor count");
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t t = 0; t < count; ++t) {
    CheckpointEntry e;
    e.name = r.text(r.u16("name length"), "name");
    const std::uint8_t rank = r.u8("rank");
    for (std::uint8_t d = 0; d < rank; ++d) e.shape.push_back(r.u32("extent"));
    const std::size_t n = shape_size(e.shape);
    if (n > r.remaining() / 4)
      throw FormatError("truncated tensor '" + e.name + "': expected " + std::to_string(n * 4) + " bytes, found " +
                            std::to_string(r.remaining()),
                        r.offset());
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32("value");
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
  return entries;
}

void save_checkpoint(const std::string& path, std::span<const CheckpointEntry> entries) {
  io::write_file(path, encode_checkpoint(entries));
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

template <class T>
std::vector<CheckpointEntry> snapshot(const NamedTensors<T>& tensors) {
  std::vector<CheckpointEntry> out;
  for (const auto& item : tensors.items) {
    CheckpointEntry e{item.name, item.tensor.shape(), {}};
    for (T v : item.tensor.data()) e.values.push_back(static_cast<float>(v));
    out.push_back(std::move(e));
  }
  return out;
}

template <class T>
void restore(const NamedTensors<T>& tensors, std::span<const CheckpointEntry> entries) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  if (by_name.size() != tensors.items.size())
    throw ContractError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                        std::to_string(tensors.items.size()));
  for (const auto& item : tensors.items) {
    const auto it = by_name.find(item.name);
    if (it == by_name.end()) throw ContractError("checkpoint is missing tensor '" + item.name + "'");
    if (it->second->shape != item.tensor.shape())
      throw DimensionError("checkpoint tensor '" + item.name + "' has shape " + to_string(it->second->shape) +
                           ", model expects " + to_string(item.tensor.shape()));
    Tensor<T> target = item.tensor;
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = static_cast<T>(it->second->values[i]);
  }
}

template std::vector<CheckpointEntry> snapshot(const NamedTensors<float>&);
template std::vector<CheckpointEntry> snapshot(const NamedTensors<double>&);
template void restore(const NamedTensors<float>&, std::span<const CheckpointEntry>);
template void restore(const NamedTensors<double>&, std::span<const CheckpointEntry>);

}  // namespace setfeat

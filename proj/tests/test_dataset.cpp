#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "setfeat/binary_io.hpp"
#include "setfeat/dataset.hpp"
#include "setfeat/errors.hpp"
#include "setfeat/shapes.hpp"
#include "test_util.hpp"

using namespace setfeat;
using setfeat::testing::data_path;
using setfeat::testing::temp_path;

namespace {

PackedDataset tiny() {
  PackedDataset d;
  d.height = 2;
  d.width = 3;
  d.channels = 1;
  d.class_names = {"ring", "tri"};
  d.counts = {1, 2};
  for (int i = 0; i < 18; ++i) d.pixels.push_back(static_cast<std::uint8_t>((i * 13) % 256));
  return d;
}

}  // namespace

TEST(Dataset, GoldenFileBytes) {
  const auto golden = io::read_file(data_path("tiny.sfds"));
  EXPECT_EQ(encode_dataset(tiny()), golden);
  EXPECT_EQ(decode_dataset(golden), tiny());
}

TEST(Dataset, PackLoadRoundTrip) {
  const auto d = gen_shapes({5, 3, 16, 3, 0.1, 9});
  const auto path = temp_path("roundtrip.sfds").string();
  pack_dataset(path, d);
  const auto back = load_dataset(path);
  EXPECT_EQ(back, d);
  EXPECT_EQ(encode_dataset(back), io::read_file(path));
}

TEST(Dataset, HeaderByteCount) {
  // 5 classes, 8 examples, 16x16x1: magic+version, then 4 u32 fields + 5 counts + names
  PackedDataset d;
  d.height = d.width = 16;
  d.channels = 1;
  d.counts.assign(5, 8);
  std::size_t names = 0;
  for (int c = 0; c < 5; ++c) {
    d.class_names.push_back("class" + std::to_string(c));
    names += 2 + d.class_names.back().size();
  }
  d.pixels.assign(5 * 8 * 256, 0);
  const auto bytes = encode_dataset(d);
  const std::size_t after_magic_version = 4 * 4 + 4 * 5 + names;
  EXPECT_EQ(dataset_header_bytes(d), 8 + after_magic_version);
  EXPECT_EQ(bytes.size(), 8 + after_magic_version + d.pixels.size());
}

TEST(Dataset, TruncatedPayloadNamesLengths) {
  auto bytes = encode_dataset(tiny());
  bytes.resize(bytes.size() - 5);
  try {
    decode_dataset(bytes);
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 18"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 13"), std::string::npos) << msg;
    EXPECT_EQ(e.offset(), dataset_header_bytes(tiny()));
  }
}

TEST(Dataset, BadMagicAndVersion) {
  auto bytes = encode_dataset(tiny());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_dataset(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  try {
    decode_dataset(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(decode_dataset(std::span<const std::uint8_t>(bytes.data(), 10)), FormatError);
}

TEST(Dataset, ZeroCountClassRejected) {
  auto d = tiny();
  d.counts[0] = 0;
  EXPECT_THROW(encode_dataset(d), ContractError);
}

TEST(Dataset, ImageAccess) {
  const auto d = tiny();
  EXPECT_EQ(d.example_index(1, 1), 2u);
  EXPECT_EQ(d.image(2)[0], (12 * 13) % 256);
  EXPECT_THROW(d.image(3), IndexError);
}

TEST(SplitManifest, DisjointAndInRange) {
  EXPECT_NO_THROW(SplitManifest::contiguous(20, 5, 0).validate(25));
  EXPECT_THROW(SplitManifest::contiguous(20, 5, 1).validate(25), ConfigError);
  SplitManifest overlap{{0, 1}, {1}, {}};
  EXPECT_THROW(overlap.validate(5), ConfigError);
}

TEST(Shapes, PayloadSize) {
  const auto d = gen_shapes({20, 40, 32, 3, 0.05, 1});
  EXPECT_EQ(d.pixels.size(), 20u * 40 * 3072);
  EXPECT_EQ(d.classes(), 20u);
}

TEST(Shapes, DeterministicUnderSeed) {
  const ShapeGenConfig cfg{6, 4, 16, 3, 0.0, 3};
  EXPECT_EQ(encode_dataset(gen_shapes(cfg)), encode_dataset(gen_shapes(cfg)));
  auto other = cfg;
  other.seed = 4;
  EXPECT_NE(gen_shapes(cfg).pixels, gen_shapes(other).pixels);
}

TEST(Shapes, ConfigValidation) {
  EXPECT_THROW(gen_shapes({5, 2, 24, 3, 0.0, 1}), ConfigError);
  EXPECT_THROW(gen_shapes({5, 2, 8, 3, 0.0, 1}), ConfigError);
  EXPECT_THROW(gen_shapes({4, 2, 16, 3, 0.0, 1}), ConfigError);
  EXPECT_THROW(gen_shapes({5, 2, 16, 3, 1.5, 1}), ConfigError);
  EXPECT_THROW(gen_shapes({29, 2, 16, 3, 0.0, 1}), ConfigError);
}

TEST(Shapes, ClassNamesDistinctAcrossTwentyEightFigures) {
  const auto d = gen_shapes({28, 1, 16, 1, 0.0, 1});
  std::set<std::string> names;
  for (const auto& n : d.class_names) names.insert(n.substr(0, n.rfind('-')));
  EXPECT_EQ(names.size(), 28u);
}

TEST(Shapes, PixelSpaceNearestCentroidBeatsChance) {
  // Within-class pixel distance to the class mean is smaller than to other class means on average.
  const auto d = gen_shapes({6, 30, 16, 1, 0.0, 5});
  const std::size_t px = d.image_bytes();
  std::vector<std::vector<double>> mean(6, std::vector<double>(px, 0.0));
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t e = 0; e < 30; ++e) {
      const auto img = d.image(d.example_index(c, e));
      for (std::size_t p = 0; p < px; ++p) mean[c][p] += img[p] / 30.0;
    }
  double within = 0, across = 0;
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t e = 0; e < 30; ++e) {
      const auto img = d.image(d.example_index(c, e));
      for (std::size_t k = 0; k < 6; ++k) {
        double dist = 0;
        for (std::size_t p = 0; p < px; ++p) dist += std::pow(img[p] - mean[k][p], 2);
        (k == c ? within : across) += std::sqrt(dist) / (k == c ? 1.0 : 5.0);
      }
    }
  EXPECT_LT(within, across);
}

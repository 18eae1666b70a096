#include <gtest/gtest.h>

#include <cmath>
#include "setfeat/backbone.hpp"
#include "setfeat/errors.hpp"
#include "test_util.hpp"

using namespace setfeat;
using setfeat::testing::random_tensor;

TEST(Backbone, Conv4ParameterCount) {
  // 3*64*9 + 3*(64*64*9) conv weights + 4*128 BN affine = 112,832
  const auto cfg = BackboneConfig::plain(3, {64, 64, 64, 64});
  EXPECT_EQ(backbone_param_formula(cfg), 112832u);
  EXPECT_EQ(Backbone<float>(cfg, 1).count_params(), 112832u);
}

TEST(Backbone, WideTrunkParameterCount) {
  const std::vector<std::size_t> widths{96, 128, 160, 200};
  std::size_t expected = 0, in = 3;
  for (auto c : widths) {
    expected += in * c * 9 + 2 * c;
    in = c;
  }
  EXPECT_EQ(expected, 586672u);  // 0.587M
  const auto cfg = BackboneConfig::plain(3, widths);
  EXPECT_EQ(Backbone<float>(cfg, 1).count_params(), expected);
}

TEST(Backbone, ResidualCountMatchesFormula) {
  BackboneConfig cfg;
  cfg.input_channels = 3;
  cfg.blocks = {{16, BlockKind::residual, true}, {16, BlockKind::residual, true}, {32, BlockKind::residual, false}};
  // block1: 3->16 (two convs + projection), block2: identity skip, block3: 16->32 with projection
  const std::size_t expect = (3 * 16 * 9 + 32) + (16 * 16 * 9 + 32) + (3 * 16 + 32) +  //
                             (16 * 16 * 9 + 32) + (16 * 16 * 9 + 32) +                //
                             (16 * 32 * 9 + 64) + (32 * 32 * 9 + 64) + (16 * 32 + 64);
  EXPECT_EQ(backbone_param_formula(cfg), expect);
  EXPECT_EQ(Backbone<float>(cfg, 1).count_params(), expect);
}

TEST(Backbone, BlockOutputShapes) {
  Rng rng(1);
  Backbone<float> net(BackboneConfig::plain(3, {8, 8, 16, 16}), 4);
  const auto z = net.forward_blocks(random_tensor<float>({2, 3, 32, 32}, rng), Mode::train);
  ASSERT_EQ(z.size(), 4u);
  EXPECT_EQ(z[0].shape(), (Shape{2, 8, 16, 16}));
  EXPECT_EQ(z[3].shape(), (Shape{2, 16, 2, 2}));
}

TEST(Backbone, OddExtentBeforeDownsampleRejected) {
  const auto cfg = BackboneConfig::plain(1, {4, 4, 4, 4});
  EXPECT_THROW(cfg.validate_input(24, 24), DimensionError);  // 24 -> 12 -> 6 -> 3 -> odd
  EXPECT_NO_THROW(cfg.validate_input(32, 16));
}

TEST(Backbone, SameSeedSameWeights) {
  const auto cfg = BackboneConfig::plain(3, {8, 8});
  Backbone<float> a(cfg, 5), b(cfg, 5), c(cfg, 6);
  NamedTensors<float> pa, pb, pc, buf;
  a.collect(pa, buf);
  b.collect(pb, buf);
  c.collect(pc, buf);
  const auto wa = pa.find("block1.conv1.weight"), wb = pb.find("block1.conv1.weight"), wc = pc.find("block1.conv1.weight");
  ASSERT_TRUE(wa && wb && wc);
  EXPECT_TRUE(std::equal(wa->data().begin(), wa->data().end(), wb->data().begin()));
  EXPECT_FALSE(std::equal(wa->data().begin(), wa->data().end(), wc->data().begin()));
}

TEST(Backbone, KaimingUniformBound) {
  Rng rng(2);
  const auto w = kaiming_uniform<double>({64, 64, 3, 3}, 64 * 9, rng);
  const double bound = std::sqrt(6.0 / (64 * 9));
  double hi = 0;
  for (double v : w.data()) hi = std::max(hi, std::abs(v));
  EXPECT_LE(hi, bound);
  EXPECT_GT(hi, 0.95 * bound);
}

TEST(Backbone, InvalidConfigs) {
  EXPECT_THROW(BackboneConfig::plain(3, {}).validate(), ConfigError);
  EXPECT_THROW(parse_block_kind("dense"), ConfigError);
}

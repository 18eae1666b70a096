#include <gtest/gtest.h>

#include <set>

#include "setfeat/config.hpp"
#include "setfeat/errors.hpp"
#include "setfeat/model_config.hpp"

namespace setfeat {
namespace {

TEST(Config, DefaultsCoverEveryKey) {
  const Config cfg;
  std::set<std::string> seen;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(seen.insert(k.key).second) << "duplicate key " << k.key;
    EXPECT_EQ(cfg.get(k.key), k.default_value);
    EXPECT_FALSE(k.help.empty()) << k.key;
  }
}

TEST(Config, DumpListsEveryKeyAndParsesBack) {
  const std::string text = Config().dump();
  for (const auto& k : config_keys()) EXPECT_NE(text.find(k.key + "=" + k.default_value), std::string::npos) << k.key;
  const Config again = Config::parse(text);
  EXPECT_EQ(again.dump(), text);
}

TEST(Config, CommentsBlankLinesAndWhitespace) {
  const Config cfg = Config::parse("# header\n\n  seed = 42   # trailing\r\nmetric=min-min\n");
  EXPECT_EQ(cfg.get_u64("seed"), 42u);
  EXPECT_EQ(cfg.get("metric"), "min-min");
}

TEST(Config, LastAssignmentWins) {
  const Config cfg = Config::parse("meta.lr=0.1\nmeta.lr=0.005\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("meta.lr"), 0.005);
}

TEST(Config, UnknownKeyNamesLine) {
  try {
    Config::parse("seed=1\nmeta.learning_rate=0.1\n", "x.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("meta.learning_rate"), std::string::npos);
  }
}

TEST(Config, MissingEqualsIsAnError) { EXPECT_THROW(Config::parse("seed 1\n"), ConfigError); }

TEST(Config, TypedGetters) {
  Config cfg;
  cfg.set("backbone.channels", "8, 16,32");
  EXPECT_EQ(cfg.get_sizes("backbone.channels"), (std::vector<std::size_t>{8, 16, 32}));
  cfg.set("meta.nesterov", "off");
  EXPECT_FALSE(cfg.get_bool("meta.nesterov"));
  cfg.set("meta.nesterov", "maybe");
  EXPECT_THROW(cfg.get_bool("meta.nesterov"), ConfigError);
  cfg.set("seed", "-3");
  EXPECT_THROW(cfg.get_u64("seed"), ConfigError);
  cfg.set("meta.lr", "1e-2x");
  EXPECT_THROW(cfg.get_double("meta.lr"), ConfigError);
  cfg.set("backbone.channels", "8,,16");
  EXPECT_THROW(cfg.get_sizes("backbone.channels"), ConfigError);
  EXPECT_THROW(cfg.set("nope", "1"), ConfigError);
}

TEST(Config, LoadMissingFileThrows) { EXPECT_ANY_THROW(Config::load("/nonexistent/setfeat.cfg")); }

TEST(ModelConfig, DefaultsDescribeTenMapperModel) {
  const ModelSpec spec = model_spec(Config());
  EXPECT_EQ(spec.layout.total(), 10u);
  EXPECT_EQ(spec.backbone.blocks.size(), 4u);
}

TEST(ModelConfig, MismatchedListLengthsRejected) {
  Config cfg;
  cfg.set("backbone.channels", "64,64,64");
  EXPECT_THROW(model_spec(cfg), ConfigError);
}

TEST(ModelConfig, SettingsFollowKeys) {
  Config cfg;
  cfg.set("meta.query", "7");
  cfg.set("meta.bn_mode", "eval");
  cfg.set("eval.episodes", "11");
  cfg.set("pretrain.loss", "mean");
  EXPECT_EQ(meta_settings(cfg).queries, 7u);
  EXPECT_EQ(meta_settings(cfg).bn_mode, Mode::eval);
  EXPECT_EQ(eval_settings(cfg).episodes, 11u);
  EXPECT_EQ(pretrain_settings(cfg).loss, PretrainLoss::mean);
}

TEST(ModelConfig, SplitsMustBeDisjointAndContiguous) {
  Config cfg;
  cfg.set("split.train", "3");
  cfg.set("split.val", "2");
  cfg.set("split.test", "1");
  const SplitManifest s = split_from(cfg);
  EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(s.val, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(s.test, (std::vector<std::size_t>{5}));
  EXPECT_NO_THROW(s.validate(6));
  EXPECT_THROW(s.validate(5), ConfigError);
}

}  // namespace
}  // namespace setfeat

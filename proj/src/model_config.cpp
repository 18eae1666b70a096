#include "setfeat/model_config.hpp"

#include "setfeat/errors.hpp"

namespace setfeat {

namespace {

std::vector<bool> flags(const Config& c, std::string_view key) {
  std::vector<bool> out;
  for (const auto& s : c.get_list(key)) {
    if (s != "0" && s != "1") throw ConfigError(std::string(key) + ": expected 0 or 1, got '" + s + "'");
    out.push_back(s == "1");
  }
  return out;
}

OptimizerConfig optimizer_from(const Config& c, const std::string& stage) {
  OptimizerConfig o;
  o.kind = parse_optimizer_kind(c.get(stage + ".optimizer"));
  o.lr = c.get_double(stage + ".lr");
  o.momentum = c.get_double(stage + ".momentum");
  o.nesterov = c.get_bool(stage + ".nesterov");
  o.weight_decay = c.get_double(stage + ".weight_decay");
  if (o.lr <= 0.0) throw ConfigError(stage + ".lr must be positive");
  return o;
}

}  // namespace

ModelSpec model_spec(const Config& c) {
  ModelSpec s;
  const auto channels = c.get_sizes("backbone.channels");
  const auto kinds = c.get_list("backbone.kinds");
  const auto down = flags(c, "backbone.downsample");
  if (kinds.size() != channels.size() || down.size() != channels.size())
    throw ConfigError("backbone.channels, backbone.kinds and backbone.downsample must have equal length");
  s.backbone.input_channels = c.get_size("backbone.input_channels");
  for (std::size_t b = 0; b < channels.size(); ++b) s.backbone.blocks.push_back({channels[b], parse_block_kind(kinds[b]), down[b]});
  s.backbone.validate();
  s.layout.per_block = c.get_sizes("mappers.layout");
  if (s.layout.per_block.size() != channels.size())
    throw ConfigError("mappers.layout needs one entry per backbone block");
  s.style = parse_attention_style(c.get("mappers.style"));
  s.residual = parse_residual_mode(c.get("mappers.residual"));
  s.seed = c.get_u64("seed");
  return s;
}

Metric metric_from(const Config& c) {
  Metric m;
  m.kind = parse_metric_kind(c.get("metric"));
  m.m = c.get_size("metric.m");
  const auto& h = c.get("metric.hausdorff");
  if (h != "symmetric" && h != "directed") throw ConfigError("metric.hausdorff must be symmetric or directed");
  m.directed = h == "directed";
  return m;
}

SplitManifest split_from(const Config& c) {
  return SplitManifest::contiguous(c.get_size("split.train"), c.get_size("split.val"), c.get_size("split.test"));
}

PretrainSettings pretrain_settings(const Config& c) {
  PretrainSettings s;
  s.steps = c.get_size("pretrain.steps");
  s.batch = c.get_size("pretrain.batch");
  s.optimizer = optimizer_from(c, "pretrain");
  s.loss = parse_pretrain_loss(c.get("pretrain.loss"));
  s.seed = c.get_u64("seed");
  return s;
}

MetaSettings meta_settings(const Config& c) {
  MetaSettings s;
  s.episodes = c.get_size("meta.episodes");
  s.way = c.get_size("meta.way");
  s.shot = c.get_size("meta.shot");
  s.queries = c.get_size("meta.query");
  s.optimizer = optimizer_from(c, "meta");
  s.lr_decay = c.get_double("meta.lr_decay");
  s.lr_decay_every = c.get_size("meta.lr_decay_every");
  s.metric = metric_from(c);
  s.logit_scale = c.get_double("logit_scale");
  const auto& bn = c.get("meta.bn_mode");
  if (bn != "train" && bn != "eval") throw ConfigError("meta.bn_mode must be train or eval");
  s.bn_mode = bn == "train" ? Mode::train : Mode::eval;
  s.seed = c.get_u64("seed");
  return s;
}

EvalSettings eval_settings(const Config& c) {
  EvalSettings s;
  s.episodes = c.get_size("eval.episodes");
  s.way = c.get_size("eval.way");
  s.shot = c.get_size("eval.shot");
  s.queries = c.get_size("eval.query");
  s.metric = metric_from(c);
  s.logit_scale = c.get_double("logit_scale");
  s.seed = c.get_u64("eval.seed");
  return s;
}

}  // namespace setfeat

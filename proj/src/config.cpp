#include "setfeat/config.hpp"

#include <charconv>
#include <sstream>

#include "setfeat/binary_io.hpp"
#include "setfeat/errors.hpp"

namespace setfeat {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "model initialisation and training seed"},
      {"backbone.input_channels", "3", "image channels"},
      {"backbone.channels", "64,64,64,64", "output channels per block"},
      {"backbone.kinds", "plain,plain,plain,plain", "plain|residual per block"},
      {"backbone.downsample", "1,1,1,1", "2x2 max-pool after each block (1/0)"},
      {"mappers.layout", "1,2,3,4", "mappers attached after each block"},
      {"mappers.style", "fc", "fc|conv-bn attention projections"},
      {"mappers.residual", "auto", "auto|on|off"},
      {"metric", "sum-min", "match-sum|min-min|sum-min|top-m|hausdorff|concat"},
      {"metric.m", "5", "m for top-m"},
      {"metric.hausdorff", "symmetric", "symmetric|directed"},
      {"logit_scale", "1.0", "logits = -logit_scale * distance"},
      {"split.train", "20", "first classes used for training"},
      {"split.val", "5", "next classes used for validation"},
      {"split.test", "0", "next classes used for testing"},
      {"pretrain.steps", "300", "optimizer steps of per-mapper classification"},
      {"pretrain.batch", "64", "images per pretraining batch, drawn from the train split"},
      {"pretrain.optimizer", "adam", "sgd|adam"},
      {"pretrain.lr", "0.001", "pretraining learning rate"},
      {"pretrain.momentum", "0.9", "sgd only"},
      {"pretrain.nesterov", "false", "sgd only"},
      {"pretrain.weight_decay", "0.0005", "L2 penalty added to the gradient"},
      {"pretrain.loss", "sum", "sum|mean over mappers"},
      {"meta.episodes", "2000", "meta-training episodes, one optimizer step each"},
      {"meta.way", "5", "classes per training episode"},
      {"meta.shot", "1", "support examples per class in training episodes"},
      {"meta.query", "15", "queries per class"},
      {"meta.optimizer", "sgd", "sgd|adam"},
      {"meta.lr", "0.01", "initial meta-training learning rate"},
      {"meta.momentum", "0.9", "sgd only"},
      {"meta.nesterov", "true", "sgd only"},
      {"meta.weight_decay", "0.0005", "L2 penalty added to the gradient"},
      {"meta.lr_decay", "0.5", "lr multiplier per interval"},
      {"meta.lr_decay_every", "500", "episodes per interval"},
      {"meta.bn_mode", "train", "train|eval batch norm during episodes"},
      {"eval.episodes", "600", "episodes averaged by eval"},
      {"eval.way", "5", "classes per evaluation episode"},
      {"eval.shot", "1", "support examples per class at evaluation"},
      {"eval.query", "15", "queries per class at evaluation"},
      {"eval.seed", "7", "episode e of an evaluation uses stream e of this seed"},
  };
  return keys;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class N>
N parse_number(std::string_view key, std::string_view text) {
  N value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty())
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return value;
}

}  // namespace

Config::Config() {
  for (const auto& k : config_keys()) values_.push_back(k.default_value);
}

std::size_t Config::index_of(std::string_view key) const {
  const auto& keys = config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i].key == key) return i;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void Config::set(std::string_view key, std::string value) { values_[index_of(key)] = std::move(value); }

const std::string& Config::get(std::string_view key) const { return values_[index_of(key)]; }

Config Config::parse(std::string_view text, std::string_view origin) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    try {
      cfg.set(key, std::string(trim(line.substr(eq + 1))));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  const auto bytes = io::read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path);
}

std::size_t Config::get_size(std::string_view key) const { return parse_number<std::size_t>(key, get(key)); }

std::uint64_t Config::get_u64(std::string_view key) const { return parse_number<std::uint64_t>(key, get(key)); }

double Config::get_double(std::string_view key) const {
  const std::string& s = get(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + s + "'");
  return v;
}

bool Config::get_bool(std::string_view key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" + s + "'");
}

std::vector<std::string> Config::get_list(std::string_view key) const {
  std::vector<std::string> out;
  std::string_view rest = get(key);
  while (true) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (item.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list item");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::vector<std::size_t> Config::get_sizes(std::string_view key) const {
  std::vector<std::size_t> out;
  for (const auto& item : get_list(key)) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::string Config::dump() const {
  std::ostringstream out;
  const auto& keys = config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out << keys[i].key << '=' << values_[i];
    if (!keys[i].help.empty()) out << "  # " << keys[i].help;
    out << '\n';
  }
  return out.str();
}

}  // namespace setfeat

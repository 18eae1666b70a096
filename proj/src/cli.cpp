#include "setfeat/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "setfeat/checkpoint.hpp"
#include "setfeat/errors.hpp"
#include "setfeat/gradcheck_suite.hpp"
#include "setfeat/model_config.hpp"
#include "setfeat/shapes.hpp"

namespace setfeat {

namespace {

/// Bad input from the user: reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config, data, in, out, log, split = "val";
  std::optional<int> threads;
  std::optional<std::size_t> episodes, way, shot, query, m;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> metric;
  bool quiet = false;
  ShapeGenConfig gen;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!std::filesystem::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

Config load_config(const Options& o) {
  if (o.config.empty()) return Config();
  require_file(o.config, "config file");
  return Config::load(o.config);
}

struct Setup {
  Config config;
  ModelSpec spec;
  PackedDataset data;
  SplitManifest split;
};

Setup setup(const Options& o) {
  Setup s;
  s.config = load_config(o);
  s.spec = model_spec(s.config);
  require_file(o.data, "dataset file");
  s.data = load_dataset(o.data);
  s.split = split_from(s.config);
  s.split.validate(s.data.classes());
  if (s.data.channels != s.spec.backbone.input_channels)
    throw ConfigError("dataset has " + std::to_string(s.data.channels) + " channels, backbone expects " +
                      std::to_string(s.spec.backbone.input_channels));
  s.spec.backbone.validate_input(s.data.height, s.data.width);
  return s;
}

ClassPool pool_for(const Setup& s, const std::string& which) {
  const std::vector<std::size_t>* ids = nullptr;
  if (which == "train") ids = &s.split.train;
  else if (which == "val") ids = &s.split.val;
  else if (which == "test") ids = &s.split.test;
  else throw UsageError("--split must be train, val or test");
  if (ids->empty()) throw ConfigError("the " + which + " split has no classes");
  return ClassPool::from(s.data, *ids);
}

template <class T>
SetFeatExtractor<T> model_for(const Setup& s, const Options& o) {
  auto model = s.spec.build<T>();
  if (!o.in.empty()) {
    require_file(o.in, "checkpoint");
    restore(model.state(), load_checkpoint(o.in));
  }
  return model;
}

void apply_threads(const Options& o) {
  if (o.threads) {
    if (*o.threads < 1) throw UsageError("--threads must be at least 1");
    omp_set_num_threads(*o.threads);
  }
}

EvalSettings eval_from(const Config& c, const Options& o) {
  EvalSettings e = eval_settings(c);
  if (o.episodes) e.episodes = *o.episodes;
  if (o.way) e.way = *o.way;
  if (o.shot) e.shot = *o.shot;
  if (o.query) e.queries = *o.query;
  if (o.seed) e.seed = *o.seed;
  if (o.metric) e.metric.kind = parse_metric_kind(*o.metric);
  if (o.m) e.metric.m = *o.m;
  e.threads = o.threads.value_or(1);
  return e;
}

void write_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write log '" + path + "'");
  write_train_log(f, rows);
}

ProgressFn progress_printer(std::ostream& err, const char* label, std::size_t every, bool quiet) {
  if (quiet) return {};
  return [&err, label, every](const TrainLogRow& r) {
    if (r.step % every != 0) return;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s %zu loss=%.4f acc=%.2f\n", label, r.step, r.loss, r.accuracy);
    err << buf << std::flush;
  };
}

template <class T>
int cmd_pretrain(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw UsageError("--out is required");
  const Setup s = setup(o);
  apply_threads(o);
  auto model = model_for<T>(s, o);
  const auto log = pretrain(model, s.data, pool_for(s, "train"), pretrain_settings(s.config),
                            progress_printer(err, "step", 25, o.quiet));
  save_checkpoint(o.out, snapshot(model.state()));
  write_log(o.log, log);
  out << "pretrained " << log.size() << " steps, final loss " << log.back().loss << ", wrote " << o.out << '\n';
  return 0;
}

template <class T>
int cmd_meta_train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw UsageError("--out is required");
  const Setup s = setup(o);
  apply_threads(o);
  auto model = model_for<T>(s, o);
  MetaSettings ms = meta_settings(s.config);
  if (o.episodes) ms.episodes = *o.episodes;
  const auto log = meta_train(model, s.data, pool_for(s, "train"), ms, progress_printer(err, "episode", 100, o.quiet));
  save_checkpoint(o.out, snapshot(model.state()));
  write_log(o.log, log);
  out << "meta-trained " << log.size() << " episodes, wrote " << o.out << '\n';
  return 0;
}

template <class T>
int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  const Setup s = setup(o);
  apply_threads(o);
  const auto model = model_for<T>(s, o);
  out << evaluate(model, s.data, pool_for(s, o.split), eval_from(s.config, o)).record() << '\n';
  return 0;
}

template <class T>
int cmd_ablate(const Options& o, std::ostream& out, std::ostream&) {
  const Setup s = setup(o);
  apply_threads(o);
  const auto model = model_for<T>(s, o);
  const ClassPool pool = pool_for(s, o.split);
  out << "metric,1-shot,5-shot\n";
  for (MetricKind kind : kAllMetrics) {
    EvalSettings e = eval_from(s.config, o);
    e.metric.kind = kind;
    e.metric.m = std::min(e.metric.m, model.mapper_count());
    char buf[96];
    e.shot = 1;
    const double one = evaluate(model, s.data, pool, e).mean;
    e.shot = 5;
    const double five = evaluate(model, s.data, pool, e).mean;
    std::snprintf(buf, sizeof buf, ",%.2f,%.2f\n", one, five);
    out << to_string(kind) << buf;
  }
  return 0;
}

template <class T>
int cmd_activation(const Options& o, std::ostream& out, std::ostream&) {
  const Setup s = setup(o);
  apply_threads(o);
  const auto model = model_for<T>(s, o);
  const auto stats = mapper_activation_stats(model, s.data, pool_for(s, o.split), eval_from(s.config, o));
  if (o.out.empty()) {
    out << stats.csv();
  } else {
    std::ofstream f(o.out);
    if (!f) throw std::runtime_error("cannot write '" + o.out + "'");
    f << stats.csv();
  }
  return 0;
}

int cmd_count_params(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw UsageError("--config is required");
  const Config c = load_config(o);
  const ModelSpec spec = model_spec(c);
  std::size_t blocks = 0, mappers = 0;
  if (spec.layout.total() == 0) {
    blocks = Backbone<float>(spec.backbone, spec.seed).count_params();
  } else {
    const auto model = spec.build<float>();
    blocks = model.backbone().count_params();
    mappers = model.count_mapper_params();
  }
  out << "blocks=" << blocks << "\nmappers=" << mappers << "\ntotal=" << blocks + mappers << '\n';
  return 0;
}

int cmd_gradcheck(std::ostream& out) {
  bool ok = true;
  for (const auto& c : run_gradcheck_suite()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s max_rel_err=%.3e tol=%.0e coords=%zu %s\n", c.name.c_str(),
                  c.report.max_rel_err, c.tol, c.report.checked, c.report.pass ? "PASS" : "FAIL");
    out << buf;
    ok = ok && c.report.pass;
  }
  return ok ? 0 : 1;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw UsageError("--out is required");
  const PackedDataset d = gen_shapes(o.gen);
  pack_dataset(o.out, d);
  out << "wrote " << o.out << ": " << d.classes() << " classes x " << o.gen.per_class << " examples, " << d.height
      << "x" << d.width << "x" << d.channels << '\n';
  return 0;
}

template <template <class> class Cmd>
int with_precision(const Options& o, std::ostream& out, std::ostream& err) {
  return precision_from_env() == Precision::f64 ? Cmd<double>{}(o, out, err) : Cmd<float>{}(o, out, err);
}

#define SETFEAT_CMD(Name, fn)                                                          \
  template <class T>                                                                   \
  struct Name {                                                                        \
    int operator()(const Options& o, std::ostream& out, std::ostream& err) const {     \
      return fn<T>(o, out, err);                                                       \
    }                                                                                  \
  };
SETFEAT_CMD(Pretrain, cmd_pretrain)
SETFEAT_CMD(MetaTrain, cmd_meta_train)
SETFEAT_CMD(Eval, cmd_eval)
SETFEAT_CMD(Ablate, cmd_ablate)
SETFEAT_CMD(Activation, cmd_activation)
#undef SETFEAT_CMD

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot image classification with attention feature sets", "setfeat"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print every config key with its default and exit");

  Options o;
  auto add_model_inputs = [&](CLI::App* sub, bool need_in) {
    sub->add_option("--config", o.config, "config file (key=value)");
    sub->add_option("--data", o.data, "packed dataset")->required();
    auto* in = sub->add_option("--in", o.in, "checkpoint to start from");
    if (need_in) in->required();
    sub->add_option("--threads", o.threads, "OpenMP threads");
  };
  auto add_eval_options = [&](CLI::App* sub) {
    sub->add_option("--episodes", o.episodes);
    sub->add_option("--way", o.way);
    sub->add_option("--shot", o.shot);
    sub->add_option("--query", o.query);
    sub->add_option("--metric", o.metric);
    sub->add_option("--m", o.m, "m for top-m");
    sub->add_option("--seed", o.seed);
    sub->add_option("--split", o.split, "train|val|test (default val)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic shapes dataset");
  gen->add_option("--out", o.out)->required();
  gen->add_option("--classes", o.gen.classes);
  gen->add_option("--per-class", o.gen.per_class);
  gen->add_option("--size", o.gen.size);
  gen->add_option("--channels", o.gen.channels);
  gen->add_option("--noise", o.gen.noise);
  gen->add_option("--seed", o.gen.seed);

  auto* pre = app.add_subcommand("pretrain", "per-mapper classification pretraining");
  add_model_inputs(pre, false);
  pre->add_option("--out", o.out, "checkpoint to write")->required();
  pre->add_option("--log", o.log, "CSV training log");
  pre->add_flag("--quiet", o.quiet);

  auto* meta = app.add_subcommand("meta-train", "episodic meta-training");
  add_model_inputs(meta, false);
  meta->add_option("--out", o.out, "checkpoint to write")->required();
  meta->add_option("--log", o.log, "CSV training log");
  meta->add_option("--episodes", o.episodes);
  meta->add_flag("--quiet", o.quiet);

  auto* eval = app.add_subcommand("eval", "few-shot evaluation with 95% confidence interval");
  add_model_inputs(eval, false);
  add_eval_options(eval);

  auto* ablate = app.add_subcommand("ablate-metrics", "evaluate one model under every set metric");
  add_model_inputs(ablate, false);
  add_eval_options(ablate);

  auto* act = app.add_subcommand("activation-stats", "how often each mapper is nearest, per class (CSV)");
  add_model_inputs(act, false);
  add_eval_options(act);
  act->add_option("--out", o.out, "write CSV here instead of stdout");

  auto* count = app.add_subcommand("count-params", "trainable parameter counts");
  count->add_option("--config", o.config)->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (print_config) {
      out << Config().dump();
      return 0;
    }
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (pre->parsed()) return with_precision<Pretrain>(o, out, err);
    if (meta->parsed()) return with_precision<MetaTrain>(o, out, err);
    if (eval->parsed()) return with_precision<Eval>(o, out, err);
    if (ablate->parsed()) return with_precision<Ablate>(o, out, err);
    if (act->parsed()) return with_precision<Activation>(o, out, err);
    if (count->parsed()) return cmd_count_params(o, out);
    if (grad->parsed()) return cmd_gradcheck(out);
    err << app.help();
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace setfeat

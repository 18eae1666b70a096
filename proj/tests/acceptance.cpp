// End-to-end acceptance run. One PASS/FAIL line per criterion; exit code 1
// if any criterion fails. `--only 1,2,6` restricts the run.

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "setfeat/binary_io.hpp"
#include "setfeat/checkpoint.hpp"
#include "setfeat/cli.hpp"
#include "setfeat/engine.hpp"
#include "setfeat/gradcheck_suite.hpp"
#include "setfeat/metrics.hpp"
#include "setfeat/model_config.hpp"
#include "setfeat/shapes.hpp"

namespace setfeat {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string config_path(const std::string& name) { return std::string(SETFEAT_CONFIG_DIR) + "/" + name; }

// ---- helpers for the metric suites -------------------------------------------

FeatureSet random_set(std::size_t rows, std::size_t dim, Rng& rng) {
  FeatureSet f(rows, dim);
  for (auto& v : f.values) v = rng.normal();
  return f;
}

FeatureSet permute_rows(const FeatureSet& f, const std::vector<std::size_t>& perm) {
  FeatureSet out(f.rows, f.dim);
  for (std::size_t i = 0; i < f.rows; ++i)
    std::copy_n(f.values.begin() + static_cast<std::ptrdiff_t>(perm[i] * f.dim), f.dim,
                out.values.begin() + static_cast<std::ptrdiff_t>(i * f.dim));
  return out;
}

FeatureSet rescale_rows(const FeatureSet& f, Rng& rng) {
  FeatureSet out = f;
  for (std::size_t i = 0; i < f.rows; ++i) {
    const double s = std::exp(rng.uniform(-3.0, 3.0));
    for (auto& v : out.row(i)) v *= s;
  }
  return out;
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) { return rng.sample_without_replacement(n, n); }

Metric metric_of(MetricKind kind, std::size_t m = 1, bool directed = false) {
  Metric mt;
  mt.kind = kind;
  mt.m = m;
  mt.directed = directed;
  return mt;
}

// ---- criteria ------------------------------------------------------------------

Outcome count_params() {
  const auto t0 = Clock::now();
  auto totals = [](const std::string& cfg) {
    std::ostringstream out, err;
    const int code = run_cli({"count-params", "--config", config_path(cfg)}, out, err);
    std::map<std::string, long> v;
    std::istringstream lines(out.str());
    std::string line;
    while (std::getline(lines, line))
      if (const auto eq = line.find('='); eq != std::string::npos) v[line.substr(0, eq)] = std::stol(line.substr(eq + 1));
    if (code != 0) v["total"] = -1;
    return v;
  };
  auto conv = totals("conv4-64.cfg");
  auto sf = totals("setfeat4-64.cfg");
  const double took = seconds_since(t0);
  const bool ok = conv["total"] == 112832 && sf["total"] >= 236500 && sf["total"] <= 238500 && took < 1.0;
  return {ok, fmt("Conv4-64 total=%ld; SetFeat4-64 blocks=%ld mappers=%ld total=%ld; %.3f s", conv["total"],
                  sf["blocks"], sf["mappers"], sf["total"], took)};
}

Outcome metric_oracle() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t instances = 0;
  double worst = 0.0, worst_graph = 0.0;
  for (std::size_t it = 0; it < 1200; ++it) {
    const std::size_t rows = 1 + rng.below(8), dim = 1 + rng.below(16);
    const FeatureSet q = random_set(rows, dim, rng), c = random_set(rows, dim, rng);
    Tensor<double> qt(Shape{1, rows, dim}, q.values), ct(Shape{1, rows, dim}, c.values);
    std::vector<Metric> metrics;
    for (MetricKind k : kAllMetrics) metrics.push_back(metric_of(k, 1 + rng.below(rows)));
    metrics.push_back(metric_of(MetricKind::hausdorff, 1, true));
    for (const Metric& mt : metrics) {
      const double expect = oracle::metric_oracle(mt, q, c);
      worst = std::max(worst, std::abs(set_distance(mt, q, c) - expect));
      worst_graph = std::max(worst_graph, std::abs(set_distances(mt, qt, ct)[0] - expect));
    }
    ++instances;
  }
  const double took = seconds_since(t0);
  return {worst <= 1e-6 && worst_graph <= 1e-6 && took < 10.0,
          fmt("%zu instances x 7 metric variants; max |diff| %.2e (direct), %.2e (differentiable); %.2f s", instances,
              worst, worst_graph, took)};
}

Outcome metric_inequalities() {
  Rng rng(77);
  std::size_t violations = 0, instances = 0;
  for (std::size_t it = 0; it < 2000; ++it) {
    const std::size_t rows = 1 + rng.below(8), dim = 1 + rng.below(16);
    const DistanceMatrix dm = pairwise(random_set(rows, dim, rng), random_set(rows, dim, rng));
    const double mn = min_min(dm), sm = sum_min(dm);
    // M * min_min evaluated as M additions, the same operation sequence sum_min uses
    double m_min = 0.0;
    for (std::size_t i = 0; i < rows; ++i) m_min += mn;
    const bool ok = sm <= match_sum(dm) && m_min <= sm && top_m(dm, 1) == mn && top_m(dm, rows) == sm;
    violations += ok ? 0 : 1;
    ++instances;
  }
  return {violations == 0, fmt("%zu instances, %zu violations", instances, violations)};
}

Outcome invariance() {
  Rng rng(31);
  double free_drift = 0.0, joint_drift = 0.0, scale_drift = 0.0;
  std::size_t sensitive = 0, checked = 0;
  const std::vector<Metric> free = {metric_of(MetricKind::min_min), metric_of(MetricKind::sum_min),
                                    metric_of(MetricKind::top_m, 3), metric_of(MetricKind::hausdorff),
                                    metric_of(MetricKind::hausdorff, 1, true)};
  const std::vector<Metric> joint = {metric_of(MetricKind::match_sum), metric_of(MetricKind::concat)};
  for (std::size_t it = 0; it < 500; ++it) {
    const std::size_t rows = 3 + rng.below(6), dim = 2 + rng.below(15);
    const FeatureSet q = random_set(rows, dim, rng), c = random_set(rows, dim, rng);
    const auto pq = random_perm(rows, rng), pc = random_perm(rows, rng);
    const FeatureSet q_ind = permute_rows(q, pq), c_ind = permute_rows(c, pc);
    const FeatureSet q_joint = permute_rows(q, pq), c_joint = permute_rows(c, pq);
    const FeatureSet q_scaled = rescale_rows(q, rng), c_scaled = rescale_rows(c, rng);
    for (const Metric& mt : free) {
      const double d = set_distance(mt, q, c);
      free_drift = std::max(free_drift, std::abs(set_distance(mt, q_ind, c_ind) - d));
      scale_drift = std::max(scale_drift, std::abs(set_distance(mt, q_scaled, c_scaled) - d));
    }
    for (const Metric& mt : joint) {
      const double d = set_distance(mt, q, c);
      joint_drift = std::max(joint_drift, std::abs(set_distance(mt, q_joint, c_joint) - d));
      // independent permutations generally change these two
      if (pq != pc) {
        ++checked;
        if (std::abs(set_distance(mt, q_ind, c_ind) - d) > 1e-6) ++sensitive;
      }
    }
  }
  const bool ok = free_drift <= 1e-6 && scale_drift <= 1e-6 && joint_drift <= 1e-6 && sensitive * 10 >= checked * 9;
  return {ok, fmt("row-wise metrics: permutation drift %.1e, rescale drift %.1e; match-sum/concat joint-permutation "
                  "drift %.1e, changed by independent permutation in %zu/%zu cases",
                  free_drift, scale_drift, joint_drift, sensitive, checked)};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  const auto checks = run_gradcheck_suite();
  const double took = seconds_since(t0);
  bool ok = took < 60.0;
  std::string detail;
  for (const auto& c : checks) {
    ok = ok && c.report.pass;
    detail += fmt("%s%s %.1e/%.0e%s", detail.empty() ? "" : ", ", c.name.c_str(), c.report.max_rel_err, c.tol,
                  c.report.pass ? "" : " FAILED");
  }
  return {ok, detail + fmt("; %.2f s", took)};
}

Outcome numeric_anchors() {
  FeatureSet query(2, 2, {1, 0, 0, 1});
  // both centroids at the same sum-min distance from the query
  const CentroidSet cents{FeatureSet(2, 2, {1, 1, 1, 1}), FeatureSet(2, 2, {2, 2, 3, 3})};
  const auto p = infer(query, cents, Metric{});
  const double infer_err = std::max(std::abs(p[0] - 0.5), std::abs(p[1] - 0.5));

  const SetFeatExtractor<double> model(BackboneConfig::plain(3, {4, 4, 4, 4}), MapperLayout{{1, 2, 3, 4}},
                                       AttentionStyle::fc, ResidualMode::automatic, 1);
  const auto heads = PretrainHeads<double>::zeros(model.mapper_count(), model.feature_dim(), 64);
  Rng rng(5);
  Tensor<double> x(Shape{4, 3, 16, 16});
  for (auto& v : x.data()) v = rng.normal();
  const std::vector<std::size_t> labels{0, 21, 42, 63};
  const double loss = pretrain_loss(model, heads, x, labels, PretrainLoss::sum).loss.item();
  const double loss_err = std::abs(loss - 10.0 * std::log(64.0));
  return {infer_err <= 1e-9 && loss_err <= 1e-6 && model.mapper_count() == 10,
          fmt("2-way equal distance p = [%.12f, %.12f]; zero-logit pretrain loss (M=10, C=64) = %.9f", p[0], p[1],
              loss)};
}

// Shared trained desk-scale model for criteria 7 and 9.
struct DeskRun {
  Config config;
  PackedDataset data;
  SplitManifest split;
  std::unique_ptr<SetFeatExtractor<float>> model;
  EvalReport untrained, trained;
  double pretrain_s = 0, meta_s = 0, eval_s = 0, total_s = 0;
  double final_pretrain_acc = 0, final_meta_acc = 0;
};

DeskRun& desk_run() {
  static std::optional<DeskRun> run;
  if (run) return *run;
  run.emplace();
  DeskRun& r = *run;
  const auto t0 = Clock::now();
  r.config = Config::load(config_path("setfeat4-64-mini.cfg"));
  ShapeGenConfig gen;
  gen.classes = 25;
  gen.per_class = 40;
  gen.size = 32;
  gen.noise = 0.05;
  gen.seed = r.config.get_u64("seed");
  r.data = gen_shapes(gen);
  r.split = split_from(r.config);
  r.split.validate(r.data.classes());
  r.model = std::make_unique<SetFeatExtractor<float>>(model_spec(r.config).build<float>());
  const ClassPool train = ClassPool::from(r.data, r.split.train), val = ClassPool::from(r.data, r.split.val);
  EvalSettings es = eval_settings(r.config);
  es.threads = 0;

  auto te = Clock::now();
  r.untrained = evaluate(*r.model, r.data, val, es);
  r.eval_s += seconds_since(te);

  auto tp = Clock::now();
  const auto plog = pretrain(*r.model, r.data, train, pretrain_settings(r.config));
  r.pretrain_s = seconds_since(tp);
  r.final_pretrain_acc = plog.back().accuracy;

  auto tm = Clock::now();
  const auto mlog = meta_train(*r.model, r.data, train, meta_settings(r.config));
  r.meta_s = seconds_since(tm);
  double acc = 0;
  const std::size_t tail = std::min<std::size_t>(100, mlog.size());
  for (std::size_t i = mlog.size() - tail; i < mlog.size(); ++i) acc += mlog[i].accuracy;
  r.final_meta_acc = acc / static_cast<double>(tail);

  te = Clock::now();
  r.trained = evaluate(*r.model, r.data, val, es);
  r.eval_s += seconds_since(te);
  r.total_s = seconds_since(t0);
  return r;
}

Outcome desk_learning() {
  const DeskRun& r = desk_run();
  const bool chance = std::abs(r.untrained.mean - 20.0) <= 5.0;
  const bool learned = r.trained.mean >= 75.0;
  const bool fast = r.total_s < 20 * 60;
  return {chance && learned && fast,
          fmt("untrained %.2f +- %.2f, trained %.2f +- %.2f (600 episodes, 5-way 1-shot val); pretrain %.0f s, "
              "meta %.0f s, eval %.0f s, total %.1f min on %d thread(s)",
              r.untrained.mean, r.untrained.ci95, r.trained.mean, r.trained.ci95, r.pretrain_s, r.meta_s, r.eval_s,
              r.total_s / 60.0, omp_get_max_threads())};
}

Outcome evaluation_protocol() {
  ShapeGenConfig gen;
  gen.classes = 10;
  gen.per_class = 20;
  gen.size = 16;
  const PackedDataset data = gen_shapes(gen);
  const SetFeatExtractor<float> model(BackboneConfig::plain(3, {16, 16}), MapperLayout{{1, 2}}, AttentionStyle::fc,
                                      ResidualMode::automatic, 4);
  const ClassPool pool = ClassPool::uniform(10, 20);
  EvalSettings es;
  es.threads = 1;
  const EvalReport a = evaluate(model, data, pool, es);
  const EvalReport b = evaluate(model, data, pool, es);
  es.threads = 4;
  const EvalReport c = evaluate(model, data, pool, es);

  const double n = static_cast<double>(a.accuracies.size());
  const double mean = std::accumulate(a.accuracies.begin(), a.accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : a.accuracies) ss += (v - mean) * (v - mean);
  const double ci = 1.96 * std::sqrt(ss / (n - 1)) / std::sqrt(n);
  const bool formula = a.episodes == 600 && a.accuracies.size() == 600 && std::abs(a.mean - mean) < 1e-9 &&
                       std::abs(a.ci95 - ci) < 1e-9;
  const bool repeat = a.record() == b.record() && a.accuracies == b.accuracies;
  const bool parallel = a.record() == c.record() && a.accuracies == c.accuracies;
  return {formula && repeat && parallel,
          fmt("%s; recomputed ci95 %.6f; same-seed rerun %s; 4 threads %s", a.record().c_str(), ci,
              repeat ? "identical" : "DIFFERS", parallel ? "identical" : "DIFFERS")};
}

Outcome activation_stats() {
  DeskRun& r = desk_run();
  EvalSettings es = eval_settings(r.config);
  es.threads = 0;
  const ActivationStats stats = mapper_activation_stats(*r.model, r.data, ClassPool::from(r.data, r.split.val), es);
  double worst = 0.0;
  for (std::size_t c = 0; c < stats.classes.size(); ++c) {
    double s = 0.0;
    for (std::size_t m = 0; m < stats.mappers.size(); ++m) s += stats.at(m, c);
    worst = std::max(worst, std::abs(s - 100.0));
  }
  std::size_t used = 0;
  for (std::size_t m = 0; m < stats.mappers.size(); ++m) {
    double s = 0.0;
    for (std::size_t c = 0; c < stats.classes.size(); ++c) s += stats.at(m, c);
    used += s > 0.0 ? 1 : 0;
  }
  return {worst <= 0.1 && used >= 3 && stats.mappers.size() == 10,
          fmt("%zu mappers x %zu classes; max column-sum error %.2e; %zu mappers selected at least once", stats.mappers.size(),
              stats.classes.size(), worst, used)};
}

Outcome golden_files() {
  const std::string dir = SETFEAT_TEST_DATA;
  const auto ds_bytes = io::read_file(dir + "/tiny.sfds");
  const auto ck_bytes = io::read_file(dir + "/tiny.sfwt");

  PackedDataset d;
  d.height = 2;
  d.width = 3;
  d.channels = 1;
  d.class_names = {"ring", "tri"};
  d.counts = {1, 2};
  for (std::size_t i = 0; i < 18; ++i) d.pixels.push_back(static_cast<std::uint8_t>((i * 13) % 256));
  const std::vector<CheckpointEntry> ck{
      {"w", {2, 3}, {0.5f, -1.25f, 3.0f, 0.0f, 2.0f, -8.0f}}, {"b", {3}, {1, 2, 3}}, {"s", {}, {7.5f}}};

  const bool ds = encode_dataset(d) == ds_bytes && decode_dataset(ds_bytes) == d &&
                  encode_dataset(decode_dataset(ds_bytes)) == ds_bytes;
  const bool cp = encode_checkpoint(ck) == ck_bytes && decode_checkpoint(ck_bytes) == ck &&
                  encode_checkpoint(decode_checkpoint(ck_bytes)) == ck_bytes;
  return {ds && cp, fmt("tiny.sfds (%zu bytes) %s; tiny.sfwt (%zu bytes) %s", ds_bytes.size(),
                        ds ? "byte-identical" : "MISMATCH", ck_bytes.size(), cp ? "byte-identical" : "MISMATCH")};
}

}  // namespace
}  // namespace setfeat

int main(int argc, char** argv) {
  using namespace setfeat;
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter counts", count_params},
      {"metric oracle equivalence", metric_oracle},
      {"metric inequalities", metric_inequalities},
      {"permutation and scale invariance", invariance},
      {"gradient checks", gradient_checks},
      {"numeric anchors", numeric_anchors},
      {"desk-scale learning", desk_learning},
      {"evaluation protocol", evaluation_protocol},
      {"activation stats", activation_stats},
      {"golden files", golden_files},
  };
  const std::set<int> chosen(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!chosen.empty() && !chosen.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d %-34s %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

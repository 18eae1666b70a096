#include "setfeat/engine.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <ostream>
#include <sstream>

#include "setfeat/autograd.hpp"
#include "setfeat/errors.hpp"
#include "setfeat/ops.hpp"

namespace setfeat {

template <class T>
Tensor<T> images_to_tensor(const PackedDataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("images_to_tensor: empty index list");
  const std::size_t h = dataset.height, w = dataset.width, c = dataset.channels, plane = h * w;
  Tensor<T> out(Shape{indices.size(), c, h, w});
  auto dst = out.data();
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto src = dataset.image(indices[n]);
    T* base = dst.data() + n * c * plane;
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t ch = 0; ch < c; ++ch)
        base[ch * plane + p] = static_cast<T>(src[p * c + ch]) * static_cast<T>(2.0 / 255.0) - T{1};
  }
  return out;
}

std::vector<double> infer(const FeatureSet& query, const CentroidSet& centroids, const Metric& metric,
                          double logit_scale) {
  std::vector<double> logits(centroids.size());
  for (std::size_t n = 0; n < centroids.size(); ++n)
    logits[n] = -logit_scale * set_distance(metric, query, centroids[n]);
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - hi));
  for (double& l : logits) l /= total;
  return logits;
}

std::size_t predict(std::span<const double> probs) {
  if (probs.empty()) throw ContractError("predict: empty probability vector");
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double episode_accuracy(std::span<const FeatureSet> support, std::span<const std::size_t> support_labels,
                        std::span<const FeatureSet> query, std::span<const std::size_t> query_labels,
                        std::size_t way, const Metric& metric, double logit_scale) {
  if (query.size() != query_labels.size()) throw ContractError("episode_accuracy: one label per query required");
  if (query.empty()) throw ContractError("episode_accuracy: no queries");
  const CentroidSet cents = centroids(support, support_labels, way);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < query.size(); ++i)
    if (predict(infer(query[i], cents, metric, logit_scale)) == query_labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(query.size());
}

std::string EvalReport::record() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "{mean=%.4f, ci95=%.4f, episodes=%zu}", mean, ci95, episodes);
  return buf;
}

EvalReport summarize(std::vector<double> accuracies) {
  EvalReport r;
  r.episodes = accuracies.size();
  if (r.episodes == 0) throw ContractError("summarize: no episodes");
  r.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(r.episodes);
  if (r.episodes > 1) {
    double ss = 0.0;
    for (double a : accuracies) ss += (a - r.mean) * (a - r.mean);
    const double sd = std::sqrt(ss / static_cast<double>(r.episodes - 1));
    r.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(r.episodes));
  }
  r.accuracies = std::move(accuracies);
  return r;
}

template <class T>
EpisodeBatch<T> episode_batch(const PackedDataset& dataset, const Episode& episode) {
  std::vector<std::size_t> all = episode.support;
  all.insert(all.end(), episode.query.begin(), episode.query.end());
  return {images_to_tensor<T>(dataset, all), episode.way, episode.shot, episode.queries};
}

namespace {

template <class T>
std::size_t row_argmax(const Tensor<T>& logits, std::size_t row) {
  const std::size_t cols = logits.dim(1);
  const T* p = logits.data().data() + row * cols;
  return static_cast<std::size_t>(std::max_element(p, p + cols) - p);
}

}  // namespace

template <class T>
EpisodeResult<T> episode_loss(const SetFeatExtractor<T>& model, const EpisodeBatch<T>& batch, const Metric& metric,
                              double logit_scale, Mode bn_mode) {
  const std::size_t ns = batch.way * batch.shot, nq = batch.way * batch.queries;
  if (batch.images.dim(0) != ns + nq)
    throw DimensionError("episode_loss: " + std::to_string(batch.images.dim(0)) + " images for " +
                         std::to_string(ns) + " support + " + std::to_string(nq) + " queries");
  const Tensor<T> feats = model.extract_set(batch.images, bn_mode);
  const std::size_t m = feats.dim(1), d = feats.dim(2);
  const Tensor<T> support = ops::reshape(ops::slice(feats, 0, 0, ns), Shape{batch.way, batch.shot, m, d});
  const Tensor<T> cents = ops::mean_axis(support, 1);
  const Tensor<T> queries = ops::slice(feats, 0, ns, ns + nq);
  const Tensor<T> logits = ops::scale(set_distances(metric, queries, cents), static_cast<T>(-logit_scale));
  std::vector<std::size_t> labels(nq);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < nq; ++i) {
    labels[i] = i / batch.queries;
    if (row_argmax(logits, i) == labels[i]) ++correct;
  }
  EpisodeResult<T> r;
  r.loss = ops::cross_entropy_logits(logits, labels);
  r.logits = logits;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(nq);
  return r;
}

PretrainLoss parse_pretrain_loss(std::string_view name) {
  if (name == "sum") return PretrainLoss::sum;
  if (name == "mean") return PretrainLoss::mean;
  throw ConfigError("unknown pretrain loss '" + std::string(name) + "' (expected sum|mean)");
}

template <class T>
PretrainHeads<T> PretrainHeads<T>::make(std::size_t mappers, std::size_t dim, std::size_t classes, Rng& rng) {
  PretrainHeads h;
  for (std::size_t m = 0; m < mappers; ++m) h.heads.push_back(Linear<T>::make(dim, classes, rng));
  return h;
}

template <class T>
PretrainHeads<T> PretrainHeads<T>::zeros(std::size_t mappers, std::size_t dim, std::size_t classes) {
  PretrainHeads h;
  for (std::size_t m = 0; m < mappers; ++m) h.heads.push_back(Linear<T>::zeros(dim, classes));
  return h;
}

template <class T>
std::vector<Tensor<T>> PretrainHeads<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (const auto& h : heads) {
    out.push_back(h.weight);
    out.push_back(h.bias);
  }
  return out;
}

template <class T>
PretrainOutput<T> pretrain_loss(const SetFeatExtractor<T>& model, const PretrainHeads<T>& heads, const Tensor<T>& images,
                                std::span<const std::size_t> labels, PretrainLoss kind) {
  if (heads.heads.size() != model.mapper_count())
    throw ContractError("pretrain_loss: " + std::to_string(heads.heads.size()) + " heads for " +
                        std::to_string(model.mapper_count()) + " mappers");
  const auto out = model.extract(images, Mode::train);
  Tensor<T> total;
  std::size_t correct = 0;
  for (std::size_t m = 0; m < heads.heads.size(); ++m) {
    const Tensor<T> logits = heads.heads[m](out.per_mapper[m]);
    const Tensor<T> ce = ops::cross_entropy_logits(logits, labels);
    total = total.defined() ? ops::add(total, ce) : ce;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (row_argmax(logits, i) == labels[i]) ++correct;
  }
  if (kind == PretrainLoss::mean) total = ops::scale(total, T{1} / static_cast<T>(heads.heads.size()));
  return {total, static_cast<double>(correct) / static_cast<double>(labels.size() * heads.heads.size())};
}

template <class T>
double pretrain_step(const SetFeatExtractor<T>& model, const PretrainHeads<T>& heads, const Tensor<T>& images,
                     std::span<const std::size_t> labels, Optimizer<T>& optimizer, PretrainLoss kind) {
  optimizer.zero_grad();
  const auto out = pretrain_loss(model, heads, images, labels, kind);
  backward(out.loss);
  optimizer.step();
  return static_cast<double>(out.loss.item());
}

void write_train_log(std::ostream& out, std::span<const TrainLogRow> rows) {
  out << "episode,loss,accuracy\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.4f\n", r.step, r.loss, r.accuracy);
    out << buf;
  }
}

namespace {

template <class T>
std::vector<Tensor<T>> concat_params(std::vector<Tensor<T>> a, const std::vector<Tensor<T>>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

template <class T>
std::vector<TrainLogRow> pretrain(const SetFeatExtractor<T>& model, const PackedDataset& dataset, const ClassPool& pool,
                                  const PretrainSettings& settings, const ProgressFn& progress) {
  if (settings.steps == 0 || settings.batch == 0) throw ConfigError("pretrain steps and batch must be positive");
  std::vector<std::size_t> examples, labels;
  for (std::size_t c = 0; c < pool.size(); ++c)
    for (std::size_t e : pool.examples[c]) {
      examples.push_back(e);
      labels.push_back(c);
    }
  if (examples.size() < settings.batch)
    throw CapacityError("pretrain batch " + std::to_string(settings.batch) + " exceeds " +
                        std::to_string(examples.size()) + " training examples");
  Rng rng(settings.seed, 101);
  Rng head_rng(settings.seed, 102);
  const auto heads = PretrainHeads<T>::make(model.mapper_count(), model.feature_dim(), pool.size(), head_rng);
  Optimizer<T> opt(settings.optimizer, concat_params(model.parameters().tensors(), heads.parameters()));
  std::vector<TrainLogRow> log;
  std::vector<std::size_t> idx(settings.batch), lab(settings.batch);
  for (std::size_t s = 0; s < settings.steps; ++s) {
    const auto pick = rng.sample_without_replacement(examples.size(), settings.batch);
    for (std::size_t i = 0; i < pick.size(); ++i) {
      idx[i] = examples[pick[i]];
      lab[i] = labels[pick[i]];
    }
    opt.zero_grad();
    const auto out = pretrain_loss(model, heads, images_to_tensor<T>(dataset, idx), lab, settings.loss);
    backward(out.loss);
    opt.step();
    log.push_back({s + 1, static_cast<double>(out.loss.item()), 100.0 * out.accuracy});
    if (progress) progress(log.back());
  }
  return log;
}

template <class T>
std::vector<TrainLogRow> meta_train(const SetFeatExtractor<T>& model, const PackedDataset& dataset,
                                    const ClassPool& pool, const MetaSettings& settings, const ProgressFn& progress) {
  if (settings.episodes == 0) throw ConfigError("meta episodes must be positive");
  if (settings.lr_decay_every == 0) throw ConfigError("lr decay interval must be positive");
  settings.metric.validate(model.mapper_count());
  Rng rng(settings.seed, 201);
  Optimizer<T> opt(settings.optimizer, model.parameters().tensors());
  std::vector<TrainLogRow> log;
  for (std::size_t e = 0; e < settings.episodes; ++e) {
    opt.set_lr(settings.optimizer.lr *
               std::pow(settings.lr_decay, static_cast<double>(e / settings.lr_decay_every)));
    const Episode ep = sample_episode(pool, settings.way, settings.shot, settings.queries, rng);
    opt.zero_grad();
    const auto r = episode_loss(model, episode_batch<T>(dataset, ep), settings.metric, settings.logit_scale,
                                settings.bn_mode);
    backward(r.loss);
    opt.step();
    log.push_back({e + 1, static_cast<double>(r.loss.item()), 100.0 * r.accuracy});
    if (progress) progress(log.back());
  }
  return log;
}

template <class T>
void episode_features(const SetFeatExtractor<T>& model, const PackedDataset& dataset, const Episode& episode,
                      std::vector<FeatureSet>& support, std::vector<FeatureSet>& query) {
  NoGradGuard guard;
  const auto batch = episode_batch<T>(dataset, episode);
  auto sets = to_feature_sets(model.extract_set(batch.images, Mode::eval), model.mapper_ids());
  const auto split = sets.begin() + static_cast<std::ptrdiff_t>(episode.support.size());
  support.assign(std::make_move_iterator(sets.begin()), std::make_move_iterator(split));
  query.assign(std::make_move_iterator(split), std::make_move_iterator(sets.end()));
}

namespace {

/// Runs body(e) for e in [0, count), in parallel when threads != 1, rethrowing the first failure.
template <class Body>
void for_each_episode(std::size_t count, int threads, Body body) {
  const int team = threads <= 0 ? omp_get_max_threads() : threads;
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(team)
  for (std::size_t e = 0; e < count; ++e) {
    try {
      body(e);
    } catch (...) {
#pragma omp critical(setfeat_episode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void check_capacity(const ClassPool& pool, const EvalSettings& s) {
  Rng probe(s.seed, 0);
  (void)sample_episode(pool, s.way, s.shot, s.queries, probe);
}

}  // namespace

template <class T>
EvalReport evaluate(const SetFeatExtractor<T>& model, const PackedDataset& dataset, const ClassPool& pool,
                    const EvalSettings& settings) {
  if (settings.episodes == 0) throw ConfigError("eval episodes must be positive");
  settings.metric.validate(model.mapper_count());
  check_capacity(pool, settings);
  std::vector<double> acc(settings.episodes);
  for_each_episode(settings.episodes, settings.threads, [&](std::size_t e) {
    Rng rng(settings.seed, e);
    const Episode ep = sample_episode(pool, settings.way, settings.shot, settings.queries, rng);
    std::vector<FeatureSet> support, query;
    episode_features(model, dataset, ep, support, query);
    acc[e] = 100.0 * episode_accuracy(support, ep.support_labels(), query, ep.query_labels(), ep.way,
                                      settings.metric, settings.logit_scale);
  });
  return summarize(std::move(acc));
}

void count_nearest_mappers(const FeatureSet& query, const FeatureSet& centroid, std::span<std::size_t> counts) {
  if (counts.size() != centroid.rows) throw DimensionError("count_nearest_mappers: one counter per centroid row");
  for (std::size_t j : row_argmins(pairwise(query, centroid))) ++counts[j];
}

ActivationStats activation_from_counts(std::vector<std::size_t> counts, std::vector<MapperId> mappers,
                                       std::vector<std::size_t> classes) {
  const std::size_t rows = mappers.size(), cols = classes.size();
  if (counts.size() != rows * cols) throw DimensionError("activation counts must be mappers x classes");
  ActivationStats s;
  s.percent.assign(rows * cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t total = 0;
    for (std::size_t m = 0; m < rows; ++m) total += counts[m * cols + c];
    if (total == 0) continue;
    for (std::size_t m = 0; m < rows; ++m)
      s.percent[m * cols + c] = 100.0 * static_cast<double>(counts[m * cols + c]) / static_cast<double>(total);
  }
  s.counts = std::move(counts);
  s.mappers = std::move(mappers);
  s.classes = std::move(classes);
  return s;
}

std::string ActivationStats::csv() const {
  std::ostringstream out;
  out << "mapper";
  for (std::size_t c : classes) out << ",class" << c;
  out << '\n';
  char buf[32];
  for (std::size_t m = 0; m < mappers.size(); ++m) {
    out << "block" << mappers[m].block << '.' << mappers[m].slot;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.2f", at(m, c));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

template <class T>
ActivationStats mapper_activation_stats(const SetFeatExtractor<T>& model, const PackedDataset& dataset,
                                        const ClassPool& pool, const EvalSettings& settings) {
  if (settings.episodes == 0) throw ConfigError("episodes must be positive");
  check_capacity(pool, settings);
  const std::size_t rows = model.mapper_count(), cols = pool.size();
  std::vector<std::vector<std::size_t>> per_episode(settings.episodes);
  for_each_episode(settings.episodes, settings.threads, [&](std::size_t e) {
    Rng rng(settings.seed, e);
    const Episode ep = sample_episode(pool, settings.way, settings.shot, settings.queries, rng);
    std::vector<FeatureSet> support, query;
    episode_features(model, dataset, ep, support, query);
    const CentroidSet cents = centroids(support, ep.support_labels(), ep.way);
    std::vector<std::size_t> counts(rows * cols, 0), column(rows);
    const auto labels = ep.query_labels();
    for (std::size_t q = 0; q < query.size(); ++q) {
      std::fill(column.begin(), column.end(), 0);
      count_nearest_mappers(query[q], cents[labels[q]], column);
      const std::size_t cls = static_cast<std::size_t>(
          std::find(pool.classes.begin(), pool.classes.end(), ep.classes[labels[q]]) - pool.classes.begin());
      for (std::size_t m = 0; m < rows; ++m) counts[m * cols + cls] += column[m];
    }
    per_episode[e] = std::move(counts);
  });
  std::vector<std::size_t> total(rows * cols, 0);
  for (const auto& c : per_episode)
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += c[i];
  return activation_from_counts(std::move(total), model.mapper_ids(), pool.classes);
}

#define SETFEAT_ENGINE(T)                                                                                              \
  template Tensor<T> images_to_tensor(const PackedDataset&, std::span<const std::size_t>);                             \
  template EpisodeBatch<T> episode_batch(const PackedDataset&, const Episode&);                                        \
  template EpisodeResult<T> episode_loss(const SetFeatExtractor<T>&, const EpisodeBatch<T>&, const Metric&, double,    \
                                         Mode);                                                                        \
  template struct PretrainHeads<T>;                                                                                    \
  template PretrainOutput<T> pretrain_loss(const SetFeatExtractor<T>&, const PretrainHeads<T>&, const Tensor<T>&,      \
                                           std::span<const std::size_t>, PretrainLoss);                                \
  template double pretrain_step(const SetFeatExtractor<T>&, const PretrainHeads<T>&, const Tensor<T>&,                 \
                                std::span<const std::size_t>, Optimizer<T>&, PretrainLoss);                            \
  template std::vector<TrainLogRow> pretrain(const SetFeatExtractor<T>&, const PackedDataset&, const ClassPool&,       \
                                             const PretrainSettings&, const ProgressFn&);                              \
  template std::vector<TrainLogRow> meta_train(const SetFeatExtractor<T>&, const PackedDataset&, const ClassPool&,     \
                                               const MetaSettings&, const ProgressFn&);                                \
  template void episode_features(const SetFeatExtractor<T>&, const PackedDataset&, const Episode&,                     \
                                 std::vector<FeatureSet>&, std::vector<FeatureSet>&);                                  \
  template EvalReport evaluate(const SetFeatExtractor<T>&, const PackedDataset&, const ClassPool&,                     \
                               const EvalSettings&);                                                                   \
  template ActivationStats mapper_activation_stats(const SetFeatExtractor<T>&, const PackedDataset&,                   \
                                                   const ClassPool&, const EvalSettings&);

SETFEAT_ENGINE(float)
SETFEAT_ENGINE(double)

}  // namespace setfeat

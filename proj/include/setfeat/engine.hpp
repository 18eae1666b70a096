#pragma once

// Episodic training and evaluation on top of a SetFeatExtractor.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "setfeat/dataset.hpp"
#include "setfeat/episode.hpp"
#include "setfeat/metrics.hpp"
#include "setfeat/optim.hpp"
#include "setfeat/setfeat.hpp"

namespace setfeat {

/// Pixel bytes mapped to [-1, 1], as an N x C x H x W batch.
template <class T>
Tensor<T> images_to_tensor(const PackedDataset& dataset, std::span<const std::size_t> indices);

/// Class probabilities: softmax over -logit_scale * d(query, centroid_n).
std::vector<double> infer(const FeatureSet& query, const CentroidSet& centroids, const Metric& metric,
                          double logit_scale = 1.0);
/// Index of the largest probability, lowest index on ties.
std::size_t predict(std::span<const double> probs);

/// Fraction of correctly classified queries given precomputed feature sets.
double episode_accuracy(std::span<const FeatureSet> support, std::span<const std::size_t> support_labels,
                        std::span<const FeatureSet> query, std::span<const std::size_t> query_labels,
                        std::size_t way, const Metric& metric, double logit_scale = 1.0);

struct EvalReport {
  std::size_t episodes = 0;
  std::vector<double> accuracies;  // percent, one per episode
  double mean = 0.0;               // percent
  double ci95 = 0.0;               // 1.96 * sample std / sqrt(episodes)

  /// `{mean=..., ci95=..., episodes=...}`
  std::string record() const;
};

EvalReport summarize(std::vector<double> accuracies_percent);

// ---- episode loss -----------------------------------------------------------

/// Images of one episode: support (class-major) followed by queries.
template <class T>
struct EpisodeBatch {
  Tensor<T> images;
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t queries = 0;
};

template <class T>
EpisodeBatch<T> episode_batch(const PackedDataset& dataset, const Episode& episode);

template <class T>
struct EpisodeResult {
  Tensor<T> loss;    // mean cross-entropy over the way * queries queries
  Tensor<T> logits;  // (way * queries) x way
  double accuracy = 0.0;
};

/// One forward pass over support and queries, class centroids from the
/// support features, logits = -logit_scale * set distance.
template <class T>
EpisodeResult<T> episode_loss(const SetFeatExtractor<T>& model, const EpisodeBatch<T>& batch, const Metric& metric,
                              double logit_scale, Mode bn_mode);

// ---- pretraining --------------------------------------------------------------

enum class PretrainLoss { sum, mean };  // mean divides the sum over mappers by M

PretrainLoss parse_pretrain_loss(std::string_view name);

/// One linear classifier per mapper, used only during pretraining.
template <class T>
struct PretrainHeads {
  std::vector<Linear<T>> heads;

  static PretrainHeads make(std::size_t mappers, std::size_t dim, std::size_t classes, Rng& rng);
  static PretrainHeads zeros(std::size_t mappers, std::size_t dim, std::size_t classes);
  std::vector<Tensor<T>> parameters() const;
};

template <class T>
struct PretrainOutput {
  Tensor<T> loss;
  double accuracy = 0.0;  // averaged over heads
};

template <class T>
PretrainOutput<T> pretrain_loss(const SetFeatExtractor<T>& model, const PretrainHeads<T>& heads, const Tensor<T>& images,
                                std::span<const std::size_t> labels, PretrainLoss kind);

/// Loss, backward through heads, mappers and backbone, one optimizer step.
template <class T>
double pretrain_step(const SetFeatExtractor<T>& model, const PretrainHeads<T>& heads, const Tensor<T>& images,
                     std::span<const std::size_t> labels, Optimizer<T>& optimizer, PretrainLoss kind);

struct TrainLogRow {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;
  double accuracy = 0.0;  // percent
};

/// `episode,loss,accuracy` CSV.
void write_train_log(std::ostream& out, std::span<const TrainLogRow> rows);

using ProgressFn = std::function<void(const TrainLogRow&)>;

struct PretrainSettings {
  std::size_t steps = 300;
  std::size_t batch = 64;
  OptimizerConfig optimizer{OptimizerKind::adam, 1e-3, 0.9, false, 0.9, 0.999, 1e-8, 5e-4};
  PretrainLoss loss = PretrainLoss::sum;
  std::uint64_t seed = 1;
};

template <class T>
std::vector<TrainLogRow> pretrain(const SetFeatExtractor<T>& model, const PackedDataset& dataset, const ClassPool& pool,
                                  const PretrainSettings& settings, const ProgressFn& progress = {});

// ---- meta-training ------------------------------------------------------------

struct MetaSettings {
  std::size_t episodes = 2000;
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t queries = 15;
  OptimizerConfig optimizer{OptimizerKind::sgd, 0.01, 0.9, true, 0.9, 0.999, 1e-8, 5e-4};
  double lr_decay = 0.5;
  std::size_t lr_decay_every = 500;
  Metric metric{};
  double logit_scale = 1.0;
  Mode bn_mode = Mode::train;
  std::uint64_t seed = 1;
};

template <class T>
std::vector<TrainLogRow> meta_train(const SetFeatExtractor<T>& model, const PackedDataset& dataset,
                                    const ClassPool& pool, const MetaSettings& settings,
                                    const ProgressFn& progress = {});

// ---- evaluation ----------------------------------------------------------------

struct EvalSettings {
  std::size_t episodes = 600;
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t queries = 15;
  Metric metric{};
  double logit_scale = 1.0;
  std::uint64_t seed = 7;
  int threads = 1;  // <= 0: OpenMP default
};

/// Support and query feature sets of one episode, eval-mode BN, no graph.
template <class T>
void episode_features(const SetFeatExtractor<T>& model, const PackedDataset& dataset, const Episode& episode,
                      std::vector<FeatureSet>& support, std::vector<FeatureSet>& query);

/// Episode e draws from Rng(seed, e), so the report does not depend on the thread count.
template <class T>
EvalReport evaluate(const SetFeatExtractor<T>& model, const PackedDataset& dataset, const ClassPool& pool,
                    const EvalSettings& settings);

/// How often each mapper holds the nearest centroid row, per class.
struct ActivationStats {
  std::vector<std::size_t> classes;   // dataset class ids (columns)
  std::vector<MapperId> mappers;      // rows
  std::vector<double> percent;        // mappers x classes
  std::vector<std::size_t> counts;    // mappers x classes

  double at(std::size_t mapper, std::size_t cls) const { return percent[mapper * classes.size() + cls]; }
  std::string csv() const;
};

/// For each query row i, the centroid row j nearest to it; adds one to counts[j].
void count_nearest_mappers(const FeatureSet& query, const FeatureSet& centroid, std::span<std::size_t> counts);

/// Column-normalised percentages from a mappers x classes count matrix.
ActivationStats activation_from_counts(std::vector<std::size_t> counts, std::vector<MapperId> mappers,
                                       std::vector<std::size_t> classes);

template <class T>
ActivationStats mapper_activation_stats(const SetFeatExtractor<T>& model, const PackedDataset& dataset,
                                        const ClassPool& pool, const EvalSettings& settings);

}  // namespace setfeat

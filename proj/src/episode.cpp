#include "setfeat/episode.hpp"

#include <algorithm>
#include <string>

#include "setfeat/errors.hpp"

namespace setfeat {

ClassPool ClassPool::from(const PackedDataset& dataset, std::span<const std::size_t> class_ids) {
  ClassPool pool;
  for (std::size_t c : class_ids) {
    if (c >= dataset.classes()) throw IndexError("class id " + std::to_string(c) + " not in dataset");
    const std::size_t first = dataset.example_index(c, 0);
    std::vector<std::size_t> ex(dataset.counts[c]);
    for (std::size_t i = 0; i < ex.size(); ++i) ex[i] = first + i;
    pool.classes.push_back(c);
    pool.examples.push_back(std::move(ex));
  }
  return pool;
}

ClassPool ClassPool::uniform(std::size_t classes, std::size_t per_class) {
  ClassPool pool;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> ex(per_class);
    for (std::size_t i = 0; i < per_class; ++i) ex[i] = c * per_class + i;
    pool.classes.push_back(c);
    pool.examples.push_back(std::move(ex));
  }
  return pool;
}

std::size_t ClassPool::smallest_class() const {
  std::size_t n = examples.empty() ? 0 : examples[0].size();
  for (const auto& ex : examples) n = std::min(n, ex.size());
  return n;
}

std::vector<std::size_t> Episode::support_labels() const {
  std::vector<std::size_t> out(support.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i / shot;
  return out;
}

std::vector<std::size_t> Episode::query_labels() const {
  std::vector<std::size_t> out(query.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i / queries;
  return out;
}

Episode sample_episode(const ClassPool& pool, std::size_t way, std::size_t shot, std::size_t queries, Rng& rng) {
  if (way == 0 || shot == 0 || queries == 0) throw ContractError("way, shot and queries must be positive");
  if (pool.size() < way)
    throw CapacityError("episode needs " + std::to_string(way) + " classes, split has " + std::to_string(pool.size()));
  for (std::size_t c = 0; c < pool.size(); ++c)
    if (pool.examples[c].size() < shot + queries)
      throw CapacityError("class " + std::to_string(pool.classes[c]) + " has " + std::to_string(pool.examples[c].size()) +
                          " examples, episode needs " + std::to_string(shot + queries) + " (shot " +
                          std::to_string(shot) + " + queries " + std::to_string(queries) + ")");
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.queries = queries;
  const auto picked = rng.sample_without_replacement(pool.size(), way);
  for (std::size_t c : picked) {
    ep.classes.push_back(pool.classes[c]);
    const auto& ex = pool.examples[c];
    const auto order = rng.sample_without_replacement(ex.size(), shot + queries);
    for (std::size_t i = 0; i < shot; ++i) ep.support.push_back(ex[order[i]]);
    for (std::size_t i = shot; i < shot + queries; ++i) ep.query.push_back(ex[order[i]]);
  }
  return ep;
}

}  // namespace setfeat

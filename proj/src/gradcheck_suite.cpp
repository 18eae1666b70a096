#include "setfeat/gradcheck_suite.hpp"

#include "setfeat/engine.hpp"
#include "setfeat/nn.hpp"
#include "setfeat/ops.hpp"
#include "setfeat/rng.hpp"

namespace setfeat {

namespace {

using Td = Tensor<double>;

Td random(Shape shape, Rng& rng, double scale = 1.0) {
  Td t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// Contract against fixed random weights so every output coordinate matters.
Td probe(const Td& y, const Td& r) { return ops::sum(ops::mul(y, r)); }

std::vector<Td> tensors_of(const NamedTensors<double>& p) { return p.tensors(); }

}  // namespace

std::vector<NamedGradCheck> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<NamedGradCheck> out;
  Rng rng(seed, 77);
  const GradCheckOptions smooth{1e-3, 1e-4, 0, seed};

  auto add = [&](std::string name, const std::function<Td()>& f, std::vector<Td> params, GradCheckOptions o) {
    out.push_back({std::move(name), o.tol, grad_check(f, params, o)});
  };

  {
    Td x = random({2, 3, 5, 5}, rng), w = random({4, 3, 3, 3}, rng, 0.5), b = random({4}, rng);
    Td r = random({2, 4, 5, 5}, rng);
    add("conv2d_3x3", [=] { return probe(ops::conv2d(x, w, b), r); }, {x, w, b}, smooth);
  }
  {
    Td x = random({2, 3, 4, 4}, rng), w = random({5, 3, 1, 1}, rng, 0.5), b = random({5}, rng);
    Td r = random({2, 5, 4, 4}, rng);
    add("conv2d_1x1", [=] { return probe(ops::conv2d(x, w, b), r); }, {x, w, b}, smooth);
  }
  {
    Td x = random({3, 4, 3, 3}, rng), g = random({4}, rng), b = random({4}, rng);
    Td r = random({3, 4, 3, 3}, rng);
    auto stats = std::make_shared<BatchNormStats<double>>(BatchNormStats<double>{Td({4}, 0.0), Td({4}, 1.0)});
    add("batchnorm_train",
        [=] { return probe(ops::batchnorm2d(x, g, b, *stats, Mode::train, 1e-5, 0.1), r); }, {x, g, b}, smooth);
  }
  {
    Td x = random({3, 4, 5}, rng), r = random({3, 4, 5}, rng);
    add("softmax", [=] { return probe(ops::softmax(x, 2), r); }, {x}, smooth);
  }
  {
    Td x = random({6, 5}, rng);
    const std::vector<std::size_t> t = {0, 4, 2, 2, 1, 3};
    add("cross_entropy", [=] { return ops::cross_entropy_logits(x, t); }, {x}, smooth);
  }
  {
    Td a = random({2, 3, 4}, rng), b = random({2, 5, 4}, rng), r = random({2, 3, 5}, rng);
    add("matmul_batched",
        [=] { return probe(ops::matmul(a, b, ops::Trans::no, ops::Trans::yes), r); }, {a, b}, smooth);
  }
  {
    Td x = random({4, 6}, rng), r = random({4, 6}, rng);
    add("l2_normalize", [=] { return probe(ops::l2_normalize(x, 1e-12), r); }, {x}, smooth);
  }
  for (auto style : {AttentionStyle::fc, AttentionStyle::conv_bn}) {
    Rng init(seed, 5);
    Mapper<double> mapper(4, 3, style, style == AttentionStyle::conv_bn, init);
    NamedTensors<double> params, buffers;
    mapper.collect("m", params, buffers);
    Td z = random({3, 4, 2, 2}, rng), r = random({3, 3}, rng);
    auto ps = tensors_of(params);
    ps.push_back(z);
    add(style == AttentionStyle::fc ? "mapper_fc" : "mapper_conv_bn",
        [=] { return probe(mapper.forward(z, Mode::train), r); }, ps, smooth);
  }
  {
    // Two blocks of 4 channels, one mapper after each, 8x8 inputs, 2-way 1-shot.
    BackboneConfig bb = BackboneConfig::plain(1, {4, 4});
    auto model = std::make_shared<SetFeatExtractor<double>>(bb, MapperLayout{{1, 1}}, AttentionStyle::fc,
                                                            ResidualMode::automatic, seed);
    EpisodeBatch<double> batch{random({2 * 1 + 2 * 2, 1, 8, 8}, rng), 2, 1, 2};
    Metric metric{MetricKind::sum_min, 1, false};
    auto params = model->parameters().tensors();
    add("episode_loss_sum_min",
        [=] { return episode_loss(*model, batch, metric, 1.0, Mode::train).loss; }, params,
        GradCheckOptions{1e-4, 1e-3, 0, seed});
  }
  return out;
}

}  // namespace setfeat

#include "setfeat/shapes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "setfeat/errors.hpp"
#include "setfeat/rng.hpp"

namespace setfeat {

void ShapeGenConfig::validate() const {
  if (size < 16 || size % 16 != 0) throw ConfigError("image size must be >= 16 and divisible by 16, got " + std::to_string(size));
  if (classes < 5 || classes > kShapeFigures)
    throw ConfigError("classes must lie in [5, " + std::to_string(kShapeFigures) + "], got " + std::to_string(classes));
  if (per_class < 1) throw ConfigError("need at least one example per class");
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise must lie in [0, 1]");
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::array<int, 7> kSides = {3, 4, 5, 6, 7, 8, 0};  // 0: ellipse

struct Figure {
  int sides;
  bool outline;
  double aspect;
  std::string name;
};

std::array<double, 3> hsv(double h, double s, double v) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Figure figure(std::size_t k) {
  Figure f;
  // sides and style cycle with coprime periods 7 and 4, so k < 28 hits every
  // combination once and a contiguous run of classes mixes all factors
  f.sides = kSides[(3 * k) % kSides.size()];
  f.outline = k % 2 == 1;
  f.aspect = (k / 2) % 2 == 1 ? 0.55 : 1.0;
  f.name = (f.sides ? std::to_string(f.sides) + "-gon" : std::string("ellipse")) + (f.outline ? "-outline" : "-solid") +
           (f.aspect < 1.0 ? "-flat" : "") + "-" + std::to_string(k);
  return f;
}

// Signed distance-like value in shape-local units; <= 0 inside.
double boundary(const Figure& f, double x, double y) {
  const double r = std::hypot(x, y);
  if (f.sides == 0) return r - 1.0;
  const double sector = 2.0 * kPi / f.sides;
  double phi = std::atan2(y, x);
  if (phi < 0) phi += 2.0 * kPi;
  const double local = std::fmod(phi, sector) - sector / 2.0;
  return r * std::cos(local) - std::cos(kPi / f.sides);
}

}  // namespace

PackedDataset gen_shapes(const ShapeGenConfig& cfg) {
  cfg.validate();
  PackedDataset d;
  d.height = d.width = static_cast<std::uint32_t>(cfg.size);
  d.channels = static_cast<std::uint32_t>(cfg.channels);
  d.counts.assign(cfg.classes, static_cast<std::uint32_t>(cfg.per_class));
  d.pixels.resize(cfg.classes * cfg.per_class * d.image_bytes());

  const std::size_t s = cfg.size;
  const double sz = static_cast<double>(s);
  constexpr double kStroke = 0.22;
  constexpr double kTilt = 0.25;  // radians
  std::vector<double> img(s * s * cfg.channels);
  std::size_t out = 0;
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    const Figure f = figure(k);
    d.class_names.push_back(f.name);
    Rng rng(cfg.seed, k);
    for (std::size_t e = 0; e < cfg.per_class; ++e) {
      const double radius = rng.uniform(0.24, 0.34) * sz;
      const double cx = rng.uniform(0.5 * sz - 0.18 * sz, 0.5 * sz + 0.18 * sz);
      const double cy = rng.uniform(0.5 * sz - 0.18 * sz, 0.5 * sz + 0.18 * sz);
      const double theta = rng.uniform(-kTilt, kTilt);
      // colour, background and polarity vary per example, so only the figure identifies the class
      const auto ink = hsv(rng.uniform(), rng.uniform(0.5, 1.0), rng.uniform(0.55, 1.0));
      const double background = rng.uniform(0.0, 0.45);
      const bool inverted = rng.uniform() < 0.5;
      const double ct = std::cos(theta), st = std::sin(theta);
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          // 2x2 supersampled coverage
          double cover = 0.0;
          for (int sy = 0; sy < 2; ++sy)
            for (int sx = 0; sx < 2; ++sx) {
              const double px = static_cast<double>(x) + 0.25 + 0.5 * sx - cx;
              const double py = static_cast<double>(y) + 0.25 + 0.5 * sy - cy;
              const double u = (ct * px + st * py) / radius;
              const double v = (-st * px + ct * py) / (radius * f.aspect);
              const double b = boundary(f, u, v);
              const bool hit = f.outline ? std::abs(b) <= kStroke / 2 : b <= 0.0;
              cover += hit ? 0.25 : 0.0;
            }
          for (std::size_t c = 0; c < cfg.channels; ++c) {
            const double fg = cfg.channels == 1 ? 0.299 * ink[0] + 0.587 * ink[1] + 0.114 * ink[2] : ink[c];
            const double value = background + cover * (fg - background);
            img[(y * s + x) * cfg.channels + c] = inverted ? 1.0 - value : value;
          }
        }
      for (double& v : img) {
        if (cfg.noise > 0.0) v += cfg.noise * rng.normal();
        d.pixels[out++] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return d;
}

}  // namespace setfeat

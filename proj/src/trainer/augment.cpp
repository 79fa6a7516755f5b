#include <algorithm>
#include <cmath>
#include <numbers>

#include "tnnsim/errors.hpp"
#include "tnnsim/trainer.hpp"

namespace tnnsim::train {

namespace {

void check(std::span<const std::uint8_t> image, const InputSpec& shape) {
  if (image.size() != shape.size()) throw DomainError("augment: image size does not match shape");
}

}  // namespace

std::vector<std::uint8_t> flip_horizontal(std::span<const std::uint8_t> image, const InputSpec& shape) {
  check(image, shape);
  std::vector<std::uint8_t> out(image.size());
  const std::size_t w = shape.width;
  for (std::size_t row = 0; row < shape.channels * shape.height; ++row)
    for (std::size_t x = 0; x < w; ++x) out[row * w + x] = image[row * w + (w - 1 - x)];
  return out;
}

std::vector<std::uint8_t> pad_crop(std::span<const std::uint8_t> image, const InputSpec& shape, std::size_t pad,
                                   std::size_t dx, std::size_t dy) {
  check(image, shape);
  if (dx > 2 * pad || dy > 2 * pad) throw DomainError("pad_crop: offset exceeds padding");
  std::vector<std::uint8_t> out(image.size(), 0);
  const long h = static_cast<long>(shape.height), w = static_cast<long>(shape.width);
  for (std::size_t c = 0; c < shape.channels; ++c)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        const long sy = y + static_cast<long>(dy) - static_cast<long>(pad);
        const long sx = x + static_cast<long>(dx) - static_cast<long>(pad);
        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
        out[(c * shape.height + static_cast<std::size_t>(y)) * shape.width + static_cast<std::size_t>(x)] =
            image[(c * shape.height + static_cast<std::size_t>(sy)) * shape.width + static_cast<std::size_t>(sx)];
      }
  return out;
}

std::vector<std::uint8_t> rotate(std::span<const std::uint8_t> image, const InputSpec& shape, double degrees) {
  check(image, shape);
  const double a = degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cy = (static_cast<double>(shape.height) - 1) / 2, cx = (static_cast<double>(shape.width) - 1) / 2;
  const long h = static_cast<long>(shape.height), w = static_cast<long>(shape.width);
  std::vector<std::uint8_t> out(image.size(), 0);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const std::uint8_t* src = image.data() + c * shape.height * shape.width;
    auto at = [&](long y, long x) -> double {
      if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
      return src[y * w + x];
    };
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        // inverse mapping: source = R(-a) * (dest - centre) + centre
        const double ry = static_cast<double>(y) - cy, rx = static_cast<double>(x) - cx;
        const double sy = ca * ry - sa * rx + cy;
        const double sx = sa * ry + ca * rx + cx;
        const double fy = std::floor(sy), fx = std::floor(sx);
        const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
        const double ty = sy - fy, tx = sx - fx;
        const double v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
                         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
        out[c * shape.height * shape.width + static_cast<std::size_t>(y * w + x)] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  }
  return out;
}

std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, const InputSpec& shape, Rng& rng,
                                  const AugmentConfig& cfg) {
  check(image, shape);
  std::vector<std::uint8_t> out(image.begin(), image.end());
  if (!cfg.enabled) return out;
  std::bernoulli_distribution coin(0.5);
  if (cfg.flip && coin(rng)) out = flip_horizontal(out, shape);
  if (coin(rng)) {
    std::uniform_int_distribution<std::size_t> off(0, 2 * cfg.pad);
    const std::size_t dx = off(rng);
    const std::size_t dy = off(rng);
    out = pad_crop(out, shape, cfg.pad, dx, dy);
  } else {
    std::uniform_real_distribution<double> ang(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    out = rotate(out, shape, ang(rng));
  }
  return out;
}

}  // namespace tnnsim::train

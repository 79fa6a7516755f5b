#pragma once

#include <algorithm>
#include <random>

#include "tnnsim/data.hpp"

namespace fixtures {

// 4x4 images; class k brightens pixels k and k + 8 over a noisy background.
inline tnnsim::data::Dataset toy_dataset(std::size_t classes, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 20.0);
  tnnsim::data::Dataset d;
  d.shape = {1, 4, 4};
  d.num_classes = classes;
  auto fill = [&](tnnsim::data::LabeledImages& s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::uint8_t>(i % classes);
      s.labels.push_back(label);
      for (std::size_t p = 0; p < 16; ++p) {
        const double base = (p == label || p == label + 8u) ? 200.0 : 40.0;
        s.images.push_back(static_cast<std::uint8_t>(std::clamp(base + noise(rng), 0.0, 255.0)));
      }
    }
  };
  fill(d.train, n_train);
  fill(d.test, n_test);
  return d;
}

}  // namespace fixtures

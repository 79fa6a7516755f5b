#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tnnsim/data.hpp"
#include "tnnsim/model.hpp"
#include "tnnsim/random.hpp"

namespace tnnsim::train {

enum class Mode { BNN, TNN };

/// +1 if w > delta, -1 if w < -delta, else 0.
int ternarize(double w, double delta);
/// sign(w) with sign(0) = +1.
int binarize(double w);
/// Straight-through derivative of every quantizer: 1 if |x| <= 1, else 0.
double ste_grad(double x);

struct ScheduleConfig {
  double lr_max = 5e-3;
  double lr_min = 0.0;
  double period_epochs = 50.0;  ///< length of the first cosine cycle
  double period_factor = 2.0;   ///< each restart multiplies the period by this

  void validate() const;
};

/// Cosine annealing with warm restarts, evaluated at optimizer step `step`.
double lr_schedule(std::size_t step, const ScheduleConfig& cfg, std::size_t steps_per_epoch);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;

  void validate() const;
};

/// One AdamW update of w in place (decoupled weight decay `weight_decay`),
/// then clipping to [-1, 1] if `clip`. `t` is the 1-based step count.
/// Throws TrainingError if a gradient is not finite.
template <typename T>
void adamw_step(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v, std::uint64_t t,
                double lr, const AdamConfig& cfg, double weight_decay, bool clip);

struct AugmentConfig {
  bool enabled = false;
  bool flip = true;
  std::size_t pad = 4;
  double max_rotation_deg = 15.0;
};

/// Mirrors every channel left to right.
std::vector<std::uint8_t> flip_horizontal(std::span<const std::uint8_t> image, const InputSpec& shape);
/// Zero-pads by `pad` and crops back at offset (dx, dy) in [0, 2 * pad].
std::vector<std::uint8_t> pad_crop(std::span<const std::uint8_t> image, const InputSpec& shape, std::size_t pad,
                                   std::size_t dx, std::size_t dy);
/// Bilinear rotation about the image centre, zero fill outside.
std::vector<std::uint8_t> rotate(std::span<const std::uint8_t> image, const InputSpec& shape, double degrees);
/// Flip with p = 0.5, then pad-and-crop or rotation with p = 0.5 each.
/// Returns the input unchanged when disabled.
std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, const InputSpec& shape, Rng& rng,
                                  const AugmentConfig& cfg);

struct TrainConfig {
  Mode mode = Mode::TNN;
  /// Comma-separated layers: cN (3x3 conv, N channels), p (2x2 max pool after
  /// a conv), dN (dense, N units). The last token is the dense logits layer.
  std::string arch = "d512,d512,d10";
  double weight_delta = 0.05;  ///< ternarization threshold for weights
  double act_delta = 0.05;     ///< phi threshold for hidden activations
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  ScheduleConfig schedule;
  AdamConfig adam;
  AugmentConfig augment;
  std::uint64_t seed = 1;
  unsigned eval_threads = 1;
  /// Train on the first N training images only (0 = all).
  std::size_t train_limit = 0;
  std::filesystem::path checkpoint;  ///< written after every epoch if non-empty

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch;
  double train_loss;  ///< NaN for epoch 0 (before training)
  double test_accuracy;
  double lr;
};

struct TrainResult {
  NetworkModel model;  ///< exported model of the best epoch
  std::vector<EpochMetrics> metrics;
  double max_test_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

/// Trains from scratch. Test accuracy is measured every epoch (epoch 0 is the
/// untrained network) by exporting the integer model and running `infer`.
/// Throws ConfigError if the config does not fit the dataset and TrainingError
/// on numerical failure.
TrainResult train(const TrainConfig& cfg, const data::Dataset& dataset,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// `epoch,train_loss,test_accuracy,lr`
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics);

}  // namespace tnnsim::train

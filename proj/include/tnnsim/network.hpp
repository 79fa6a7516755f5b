#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tnnsim/model.hpp"
#include "tnnsim/trainer.hpp"

namespace tnnsim::train {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

struct ArchLayer {
  enum class Kind { Conv, Dense, Pool };
  Kind kind;
  std::size_t units = 0;
};

/// Throws ConfigError on an empty or malformed description.
std::vector<ArchLayer> parse_arch(const std::string& arch);

struct QuantConfig {
  Mode mode = Mode::TNN;
  double weight_delta = 0.05;
  double act_delta = 0.05;
  /// Replace every quantizer by its clipped-identity surrogate.
  bool surrogate = false;
};

template <typename T>
struct LayerBase;

/// Trainable network with latent weights, batchnorm parameters and AdamW state.
/// Hidden conv/dense layers are followed by [pools], batchnorm and a quantized
/// activation; the last dense layer emits alpha * (dot - bias) with a learned
/// bias and alpha = 1/(2 sqrt(fan_in)).
template <typename T>
class Network {
 public:
  struct Param {
    std::string name;
    T* value;
    T* grad;
    std::size_t size;
    bool latent;  ///< weight-decayed and clipped to [-1, 1]
  };

  Network(const InputSpec& input, const std::string& arch, const QuantConfig& quant, std::uint64_t seed);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const InputSpec& input() const { return input_; }
  std::size_t num_classes() const { return classes_; }
  const QuantConfig& quant() const { return quant_; }
  QuantConfig& quant() { return quant_; }

  /// Columns are samples: one (c, y, x) pixel vector each.
  static Mat<T> to_batch(std::span<const std::uint8_t> pixels, std::size_t count);

  /// Forward pass; `training` selects batch statistics (and updates running
  /// statistics) instead of running statistics. Returns the mean softmax
  /// cross-entropy and caches what backward needs.
  T forward(const Mat<T>& x, std::span<const std::uint8_t> labels, bool training);
  const Mat<T>& logits() const { return logits_; }

  /// Gradients of the cached loss with respect to every parameter.
  void backward();
  /// Gradients for an arbitrary upstream gradient on the logits.
  void backward_from(const Mat<T>& dlogits);

  std::vector<Param> params();

  /// AdamW on every parameter; latent weights get weight decay and clipping.
  void adam_update(double lr, const AdamConfig& cfg);
  std::uint64_t step_count() const { return step_; }

  /// Integer inference model: quantized weights, Q16.16 biases and batchnorm,
  /// folded thresholds.
  NetworkModel export_model() const;

  /// Latents, batchnorm running statistics and optimizer moments (magic "TNS1").
  void save_checkpoint(const std::filesystem::path& path) const;
  /// Throws FormatError if the file does not match this network's layout.
  void load_checkpoint(const std::filesystem::path& path);

 private:
  InputSpec input_;
  QuantConfig quant_;
  std::size_t classes_ = 0;
  std::vector<std::unique_ptr<LayerBase<T>>> layers_;
  Mat<T> logits_;
  Mat<T> probs_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t step_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace tnnsim::train

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "tnnsim/ternary.hpp"
#include "tnnsim/tnn.hpp"

namespace tnnsim {

/// Real values stored as Q16.16 fixed point.
inline constexpr double kFixedOne = 65536.0;

/// 3x3 convolution, same padding, stride 1. Weights shaped [out_c, in_c, 3, 3].
struct ConvLayer {
  std::size_t in_c = 0;
  std::size_t out_c = 0;
  TernaryTensor weights;
  std::vector<std::int32_t> bias_q;  ///< T_j, Q16.16
};

/// Fully connected. Weights shaped [out, in]; the input is flattened in (c, y, x) order.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  TernaryTensor weights;
  std::vector<std::int32_t> bias_q;  ///< T_j, Q16.16
};

/// 2x2 stride-2 max pool over pre-activations; odd trailing rows/cols are dropped.
struct MaxPoolLayer {};

/// Per-channel batchnorm. gamma and beta are Q16.16; mean and std are Q16.16
/// scaled down by 2^shift so large accumulator statistics fit in 32 bits.
struct BatchNormLayer {
  std::size_t channels = 0;
  std::uint8_t shift = 0;
  std::vector<std::int32_t> gamma_q;
  std::vector<std::int32_t> beta_q;
  std::vector<std::int32_t> mean_q;
  std::vector<std::int32_t> std_q;

  /// Dequantized parameters of channel c (eps 0, var = std^2).
  BatchNormParams params(std::size_t c) const;
  /// Quantizes real parameters, choosing the smallest shift that fits.
  static BatchNormLayer quantize(std::span<const BatchNormParams> per_channel);
};

/// Hidden activation with its folded per-channel integer thresholds.
struct ActivationLayer {
  ActivationKind kind = ActivationKind::Phi;
  std::int32_t delta_q = 0;  ///< Q16.16
  std::vector<FoldedThreshold> thresholds;

  double delta() const { return delta_q / kFixedOne; }
};

using Layer = std::variant<ConvLayer, DenseLayer, MaxPoolLayer, BatchNormLayer, ActivationLayer>;

/// Input images: channels x height x width unsigned 8-bit pixels, (c, y, x) order.
struct InputSpec {
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

struct NetworkModel {
  InputSpec input;
  std::vector<Layer> layers;

  /// Checks layer ordering and shape compatibility; throws DomainError. The
  /// last layer must be a dense layer producing the logits.
  void validate() const;
  std::size_t num_classes() const;
  /// Recomputes every activation's thresholds from the producing layer's bias,
  /// the optional batchnorm in between and the activation's delta.
  void fold_thresholds();
  /// True if every hidden activation uses sign and every weight is nonzero.
  bool is_binary() const;
};

struct InferenceResult {
  std::size_t num_classes = 0;
  std::vector<int> labels;
  std::vector<std::int64_t> logits;  ///< row-major [image][class], Q16.16

  std::span<const std::int64_t> logits_of(std::size_t i) const {
    return std::span<const std::int64_t>(logits).subspan(i * num_classes, num_classes);
  }
};

/// Integer-only forward pass. Logits are dot * 2^16 - T_q; the label is the
/// argmax with ties going to the lowest index. Throws DomainError if the pixel
/// count is not count * input.size(). Results do not depend on `threads`.
InferenceResult infer(const NetworkModel& model, std::span<const std::uint8_t> pixels, std::size_t count,
                      unsigned threads = 1);

double accuracy(const InferenceResult& result, std::span<const std::uint8_t> labels);

// Single-layer building blocks over (c, y, x) tensors.

/// Weights [out, in, 3, 3] over a ternary input [in, h, w]; returns [out, h, w].
std::vector<std::int64_t> conv3x3_forward(const TernaryTensor& weights, const TernaryTensor& input,
                                          std::size_t h, std::size_t w);
/// Weights [out, in, 3, 3] over pixel input [in, h, w].
std::vector<std::int64_t> conv3x3_forward(const TernaryTensor& weights, std::span<const std::uint8_t> input,
                                          std::size_t h, std::size_t w);
/// Weights [out, in] over a ternary input of length in.
std::vector<std::int64_t> dense_forward(const TernaryTensor& weights, const TernaryTensor& input);
/// [c, h, w] -> [c, h/2, w/2].
std::vector<std::int64_t> maxpool2_forward(std::span<const std::int64_t> input, std::size_t c, std::size_t h,
                                           std::size_t w);

}  // namespace tnnsim

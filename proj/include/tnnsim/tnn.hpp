#pragma once

#include <cstdint>
#include <optional>

#include "tnnsim/ternary.hpp"

namespace tnnsim {

/// Binary product; throws DomainError unless both inputs are +-1.
int xnor(int w, int x);
/// Ternary product; throws DomainError for inputs outside {-1, 0, +1}.
int gxnor(int w, int x);
/// Sum of gxnor over the elements; throws DomainError on a length mismatch.
std::int64_t gxnor_dot(const TernaryTensor& w_row, const TernaryTensor& x);

/// +1 if s > delta, -1 if s < -delta, 0 otherwise.
int phi(double s, double delta);
/// +1 if s >= 0, else -1.
int sign_activation(double s);

enum class ActivationKind : std::uint8_t { None = 0, Sign = 1, Phi = 2 };

struct BatchNormParams {
  double gamma = 1.0;
  double beta = 0.0;
  double mean = 0.0;
  double var = 1.0;
  double eps = 1e-5;

  double stddev() const;
  double apply(double s) const;
  void validate() const;
};

struct NeuronParams {
  double threshold = 0.0;  ///< T_j
  std::optional<BatchNormParams> bn;
  ActivationKind kind = ActivationKind::Phi;
};

struct ActivationConfig {
  double delta = 0.05;
  void validate() const;
};

/// Unfolded reference path: activation(bn(dot - T)). With kind None returns the
/// pre-activation value itself. Throws DomainError on a shape mismatch.
double neuron_forward(const TernaryTensor& w_row, const TernaryTensor& x, const NeuronParams& params,
                      const ActivationConfig& act);

/// Integer comparison equivalent to bias, batchnorm and activation. With
/// d = flip ? -dot : dot the output is +1 if d >= hi, -1 if d <= lo, else 0.
struct FoldedThreshold {
  std::int32_t hi = 0;
  std::int32_t lo = -1;
  bool flip = false;

  int apply(std::int64_t dot) const {
    const std::int64_t d = flip ? -dot : dot;
    if (d >= hi) return 1;
    if (d <= lo) return -1;
    return 0;
  }

  friend bool operator==(const FoldedThreshold&, const FoldedThreshold&) = default;
};

/// Folds (T, bn, kind, delta) into integer thresholds; kind must be Sign or Phi.
/// Thresholds are clamped to the int32 range, which leaves the result unchanged
/// for any |dot| < 2^31 - 1.
FoldedThreshold fold_threshold(double threshold, const std::optional<BatchNormParams>& bn,
                               ActivationKind kind, double delta);

}  // namespace tnnsim

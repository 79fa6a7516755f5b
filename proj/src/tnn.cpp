#include "tnnsim/tnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tnnsim/errors.hpp"

namespace tnnsim {

int xnor(int w, int x) {
  if ((w != 1 && w != -1) || (x != 1 && x != -1))
    throw DomainError("xnor: inputs must be +-1, got " + std::to_string(w) + ", " + std::to_string(x));
  return w == x ? 1 : -1;
}

int gxnor(int w, int x) {
  if (w < -1 || w > 1 || x < -1 || x > 1)
    throw DomainError("gxnor: inputs must be ternary, got " + std::to_string(w) + ", " + std::to_string(x));
  return w * x;
}

std::int64_t gxnor_dot(const TernaryTensor& w_row, const TernaryTensor& x) {
  if (w_row.size() != x.size())
    throw DomainError("gxnor_dot: length mismatch " + std::to_string(w_row.size()) + " vs " +
                      std::to_string(x.size()));
  const BitPlanes& w = w_row.planes();
  const BitPlanes& v = x.planes();
  return gxnor_dot_words(w.plus.data(), w.minus.data(), v.plus.data(), v.minus.data(), w.plus.size());
}

int phi(double s, double delta) {
  if (s > delta) return 1;
  if (s < -delta) return -1;
  return 0;
}

int sign_activation(double s) { return s >= 0.0 ? 1 : -1; }

double BatchNormParams::stddev() const { return std::sqrt(var + eps); }

double BatchNormParams::apply(double s) const { return gamma * (s - mean) / stddev() + beta; }

void BatchNormParams::validate() const {
  if (!(var > 0.0) || !std::isfinite(var)) throw DomainError("batchnorm: variance must be > 0");
  if (!(eps >= 0.0)) throw DomainError("batchnorm: eps must be >= 0");
  if (!std::isfinite(gamma) || !std::isfinite(beta) || !std::isfinite(mean))
    throw DomainError("batchnorm: parameters must be finite");
}

void ActivationConfig::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("activation: delta must be >= 0");
}

double neuron_forward(const TernaryTensor& w_row, const TernaryTensor& x, const NeuronParams& params,
                      const ActivationConfig& act) {
  act.validate();
  double s = static_cast<double>(gxnor_dot(w_row, x)) - params.threshold;
  if (params.bn) {
    params.bn->validate();
    s = params.bn->apply(s);
  }
  switch (params.kind) {
    case ActivationKind::Sign:
      return sign_activation(s);
    case ActivationKind::Phi:
      return phi(s, act.delta);
    case ActivationKind::None:
      break;
  }
  return s;
}

namespace {

constexpr double kMaxT = std::numeric_limits<std::int32_t>::max();
constexpr double kMinT = std::numeric_limits<std::int32_t>::min() + 1.0;

std::int32_t clamp32(double v) { return static_cast<std::int32_t>(std::clamp(v, kMinT, kMaxT)); }

}  // namespace

FoldedThreshold fold_threshold(double threshold, const std::optional<BatchNormParams>& bn,
                               ActivationKind kind, double delta) {
  if (kind == ActivationKind::None) throw DomainError("fold_threshold: activation kind must be sign or phi");
  if (!(delta >= 0.0)) throw DomainError("fold_threshold: delta must be >= 0");
  // y = a * (dot - c) + beta
  double a = 1.0;
  double c = threshold;
  double beta = 0.0;
  if (bn) {
    bn->validate();
    a = bn->gamma / bn->stddev();
    c += bn->mean;
    beta = bn->beta;
  }

  FoldedThreshold f;
  if (a == 0.0) {
    const int out = kind == ActivationKind::Sign ? sign_activation(beta) : phi(beta, delta);
    if (out > 0) {
      f.hi = static_cast<std::int32_t>(kMinT);
      f.lo = f.hi - 1;
    } else if (out < 0) {
      f.hi = static_cast<std::int32_t>(kMaxT);
      f.lo = f.hi - 1;
    } else {
      f.hi = static_cast<std::int32_t>(kMaxT);
      f.lo = static_cast<std::int32_t>(kMinT);
    }
    return f;
  }
  if (a < 0.0) {
    // with d = -dot: y = |a| * (d + c) + beta
    f.flip = true;
    a = -a;
    c = -c;
  }
  if (kind == ActivationKind::Sign) {
    f.hi = clamp32(std::ceil(c - beta / a));
    f.lo = f.hi - 1;
  } else {
    f.hi = clamp32(std::floor(c + (delta - beta) / a) + 1.0);
    f.lo = clamp32(std::ceil(c + (-delta - beta) / a) - 1.0);
  }
  return f;
}

}  // namespace tnnsim

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tnnsim/errors.hpp"
#include "tnnsim/trainer.hpp"

namespace tnnsim::train {

int ternarize(double w, double delta) {
  if (w > delta) return 1;
  if (w < -delta) return -1;
  return 0;
}

int binarize(double w) { return w >= 0.0 ? 1 : -1; }

double ste_grad(double x) { return std::abs(x) <= 1.0 ? 1.0 : 0.0; }

void ScheduleConfig::validate() const {
  if (!(lr_max > 0.0) || !std::isfinite(lr_max)) throw ConfigError("train: lr_max must be > 0");
  if (!(lr_min >= 0.0) || lr_min > lr_max) throw ConfigError("train: lr_min must be in [0, lr_max]");
  if (!(period_epochs > 0.0)) throw ConfigError("train: restart period must be > 0");
  if (!(period_factor >= 1.0)) throw ConfigError("train: restart factor must be >= 1");
}

double lr_schedule(std::size_t step, const ScheduleConfig& cfg, std::size_t steps_per_epoch) {
  cfg.validate();
  if (steps_per_epoch == 0) throw DomainError("lr_schedule: steps_per_epoch must be >= 1");
  double period = cfg.period_epochs * static_cast<double>(steps_per_epoch);
  double t = static_cast<double>(step);
  if (cfg.period_factor == 1.0) {
    t = std::fmod(t, period);
  } else {
    while (t >= period) {
      t -= period;
      period *= cfg.period_factor;
    }
  }
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t / period));
}

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train: adam betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train: adam eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight decay must be >= 0");
}

template <typename T>
void adamw_step(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v, std::uint64_t t,
                double lr, const AdamConfig& cfg, double weight_decay, bool clip) {
  if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size())
    throw DomainError("adamw_step: size mismatch");
  if (t == 0) throw DomainError("adamw_step: step count starts at 1");
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!std::isfinite(static_cast<double>(g[i])))
      throw TrainingError("adamw_step: non-finite gradient at element " + std::to_string(i));
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    double wi = static_cast<double>(w[i]);
    wi -= lr * (mi / c1 / (std::sqrt(vi / c2) + cfg.eps) + weight_decay * wi);
    if (clip) wi = std::clamp(wi, -1.0, 1.0);
    w[i] = static_cast<T>(wi);
  }
}

template void adamw_step<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                std::uint64_t, double, const AdamConfig&, double, bool);
template void adamw_step<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                 std::uint64_t, double, const AdamConfig&, double, bool);

}  // namespace tnnsim::train

#include "tnnsim/device.hpp"

#include <cmath>
#include <string>

#include "tnnsim/errors.hpp"

namespace tnnsim::device {

void ProgrammingProfile::validate() const {
  if (!(lrs_median > 0.0) || !(hrs_median > 0.0) || !std::isfinite(lrs_median) ||
      !std::isfinite(hrs_median)) {
    throw ConfigError("programming profile: medians must be finite and > 0");
  }
  if (!(lrs_median < hrs_median)) {
    throw ConfigError("programming profile: lrs_median (" + std::to_string(lrs_median) +
                      ") must be below hrs_median (" + std::to_string(hrs_median) + ")");
  }
  if (!(lrs_sigma >= 0.0) || !(hrs_sigma >= 0.0) || !std::isfinite(lrs_sigma) ||
      !std::isfinite(hrs_sigma)) {
    throw ConfigError("programming profile: sigmas must be finite and >= 0");
  }
}

double program_cell(DeviceMode mode, const ProgrammingProfile& profile, Rng& rng) {
  profile.validate();
  const bool lrs = mode == DeviceMode::LRS;
  const double median = lrs ? profile.lrs_median : profile.hrs_median;
  const double sigma = lrs ? profile.lrs_sigma : profile.hrs_sigma;
  return median * lognormal_factor(sigma, rng);
}

}  // namespace tnnsim::device

#pragma once

#include "tnnsim/random.hpp"

namespace tnnsim::device {

/// Programmed state of a single RRAM cell.
enum class DeviceMode { LRS, HRS };

/// Lognormal programming statistics for the two resistance states.
/// Medians are in ohms, sigmas are the shape parameter of ln(R).
struct ProgrammingProfile {
  double lrs_median = 20e3;
  double lrs_sigma = 0.15;
  double hrs_median = 350e3;
  double hrs_sigma = 0.5;

  /// Throws ConfigError if a median is non-positive, LRS >= HRS, or a sigma is negative.
  void validate() const;

  /// Zero-variance copy with the same medians.
  ProgrammingProfile deterministic() const {
    ProgrammingProfile p = *this;
    p.lrs_sigma = p.hrs_sigma = 0.0;
    return p;
  }
};

/// Draws the resistance obtained after programming a cell into `mode`.
/// With sigma == 0 the median is returned exactly and `rng` is not advanced.
double program_cell(DeviceMode mode, const ProgrammingProfile& profile, Rng& rng);

}  // namespace tnnsim::device

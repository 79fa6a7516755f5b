#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tnnsim/random.hpp"

namespace tnnsim::pcsa {

inline constexpr double kNonResolving = std::numeric_limits<double>::infinity();

/// Behavioral parameters of the precharge sense amplifier at one supply voltage.
///
/// During the evaluation phase both precharged outputs discharge through their
/// branch resistance, V(t) = Vdd * exp(-t / (R * C)). The latch resolves once
/// the faster branch has dropped below `trip_fraction * Vdd` while the two
/// branches are at least `min_differential * Vdd` apart; the outputs are
/// complementary `latch_delay` later.
struct PcsaParams {
  double vdd = 0.6;                 ///< supply voltage (V)
  double branch_capacitance = 1e-12;  ///< C (F)
  double trip_fraction = 0.5;       ///< v_trip, fraction of Vdd
  double min_differential = 0.02;   ///< dv_min, fraction of Vdd
  double latch_delay = 0.0;         ///< t_latch (s)
  double jitter_sigma = 0.04;       ///< lognormal shape of the trial-to-trial time spread

  void validate() const;
};

enum class Branch { BL, BLb };

/// Result of one sense operation. `resolved` is the XOR of Q and Qb at the end
/// of the window; when set, `winner` is the branch that discharged first.
struct SenseOutcome {
  bool resolved = false;
  Branch winner = Branch::BL;
  double time = kNonResolving;

  static SenseOutcome unresolved() { return {}; }
};

/// Deterministic switching time in seconds, kNonResolving when the branches never
/// separate by dv_min while the fast branch is below the trip point (always the
/// case for equal resistances). Throws DomainError for non-positive resistances.
double switching_time(double r_bl, double r_blb, const PcsaParams& params);

/// Resolution time without the latch delay; kNonResolving as above.
double resolution_time(double r_bl, double r_blb, const PcsaParams& params);

/// One jittered sense operation of duration `window`. Draws exactly one normal
/// variate from `rng` when jitter_sigma > 0, whatever the outcome.
SenseOutcome sense(double r_bl, double r_blb, const PcsaParams& params, double window,
                   Rng& rng);

// --- calibration ---------------------------------------------------------

struct Anchor {
  double r_bl;
  double r_blb;
  double vdd;
  double target_time;  ///< s
};

/// Which parameters the calibration may move. The others keep the values of
/// the initial parameter set.
struct FreeParams {
  bool capacitance = true;
  bool trip_fraction = true;
  bool min_differential = true;
  bool latch_delay = true;

  std::size_t count() const {
    return std::size_t{capacitance} + trip_fraction + min_differential + latch_delay;
  }
};

struct AnchorFit {
  Anchor anchor;
  double fitted_time;
  double rel_error;  ///< (fitted - target) / target; +inf when the fit does not resolve
};

struct CalibrationResult {
  PcsaParams params;
  std::vector<AnchorFit> fits;
  double objective = 0.0;  ///< sum of squared relative errors

  double max_abs_rel_error() const;
  /// Every anchor reproduced within the soft tolerance (10 %).
  bool within_tolerance() const { return max_abs_rel_error() <= kSoftTolerance; }

  static constexpr double kSoftTolerance = 0.10;
  static constexpr double kHardTolerance = 0.25;
};

/// Fits the free parameters of `initial` to the anchors by minimizing the sum of
/// squared relative time errors (deterministic multi-start Nelder-Mead in
/// log/logit coordinates). All anchors must share one supply voltage, which is
/// copied into the result. Throws DomainError for fewer anchors than required
/// (2, or 1 when every parameter is free) or non-positive targets, and
/// CalibrationError when some anchor stays off by more than 25 %.
CalibrationResult calibrate(std::span<const Anchor> anchors, const FreeParams& free,
                            const PcsaParams& initial);

/// Writes `r_bl_ohm,r_blb_ohm,vdd_v,target_ns,fitted_ns,rel_error`.
void write_residual_report(std::ostream& out, const CalibrationResult& result);
std::string residual_report(const CalibrationResult& result);

/// Built-in anchor sets. 0.6 V: the two transient simulations (LRS/HRS and
/// HRS/HRS), the edge of the 50 ns convergence experiment and the HRS/HRS
/// boundary of the switching-time map. 1.2 V: the same points three times faster.
std::vector<Anchor> default_anchors(double vdd);

/// Fit behind the built-in parameter sets. 0.6 V frees all four parameters;
/// 1.2 V frees C and v_trip with dv_min and t_latch fixed at a third of their
/// 0.6 V values. Jitter is set to kDefaultJitterSigma.
CalibrationResult calibrate_builtin(double vdd);

/// calibrate_builtin(vdd).params, computed once per voltage and cached.
/// Throws ConfigError for other voltages.
const PcsaParams& default_params(double vdd);

/// Default jitter for the built-in parameter sets.
inline constexpr double kDefaultJitterSigma = 0.04;

// --- switching-time maps -------------------------------------------------

/// `n` log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct SwitchingMap {
  std::vector<double> grid;   ///< resistance values (ohm), shared by both axes
  std::vector<double> times;  ///< row-major, times[i * n + j] = t_sw(grid[i], grid[j])

  std::size_t size() const { return grid.size(); }
  double at(std::size_t i_bl, std::size_t j_blb) const { return times[i_bl * size() + j_blb]; }

  /// Cells whose switching time exceeds `threshold`, restricted to both
  /// resistances inside [lo, hi].
  std::size_t count_slower_than(double threshold, double lo = 0.0,
                                double hi = std::numeric_limits<double>::infinity()) const;
};

SwitchingMap switching_time_map(std::span<const double> r_grid, const PcsaParams& params);

/// CSV with header `r_bl_ohm,r_blb_ohm,t_sw_ns`; non-resolving cells as `inf`.
void write_map_csv(std::ostream& out, const SwitchingMap& map);

}  // namespace tnnsim::pcsa

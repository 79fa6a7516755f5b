#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tnnsim/array.hpp"
#include "tnnsim/data.hpp"
#include "tnnsim/model.hpp"
#include "tnnsim/random.hpp"
#include "tnnsim/ternary.hpp"

namespace tnnsim::faults {

/// Independent per-weight error probabilities. Type 1: sign switch of a
/// nonzero weight. Type 2: nonzero -> 0 or 0 -> +-1 (equiprobable sign).
struct ErrorSpec {
  double type1_rate = 0.0;
  double type2_rate = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless both rates are in [0, 1].
  void validate() const;
};

/// Corrupted copy of `weights`. Every element draws the type-1 decision, then
/// (unless `binary`) the type-2 decision on the possibly flipped value.
TernaryTensor inject(const TernaryTensor& weights, const ErrorSpec& spec, Rng& rng, bool binary = false);

/// Corrupted copy of every conv/dense weight tensor. Binary models only get
/// type-1 errors.
NetworkModel inject_model(const NetworkModel& model, const ErrorSpec& spec, Rng& rng);

/// 13 log-spaced rates from 1e-4 to 1e-1.
std::vector<double> default_ber_grid();

struct SweepRow {
  int error_type;
  double ber;
  std::size_t run;
  double accuracy;
};

struct SweepSummary {
  int error_type;
  double ber;
  double mean_acc;
  double sd_acc;  ///< sample standard deviation over runs (0 for one run)
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summary;
};

/// Accuracy over the full `test` split for each (rate, run); run k at rate
/// index i corrupts a fresh copy with the stream derived from
/// (seed, error_type, i, k). `error_type` is 1 or 2.
SweepResult ber_sweep(const NetworkModel& model, const data::LabeledImages& test, std::span<const double> rates,
                      int error_type, std::size_t runs, std::uint64_t seed, unsigned threads = 1);

/// Smallest rate at which the mean accuracy has dropped by `drop` below
/// `clean_accuracy`, interpolated linearly in log(rate) between grid points.
/// +inf if the sweep never drops that far.
double drop_ber(std::span<const SweepSummary> summary, double clean_accuracy, double drop);

/// `error_type,ber,run,accuracy`
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
/// `error_type,ber,mean_acc,sd_acc`
void write_summary_csv(std::ostream& out, std::span<const SweepSummary> summary);

struct ArrayEvalResult {
  double accuracy = 0.0;
  array::ReadoutErrorStats stats;  ///< over every weight of every layer
  std::vector<array::ReadoutErrorStats> per_layer;
};

/// Programs every conv/dense weight into a 2T2R array (stream (seed, layer, 0)),
/// reads it back once (stream (seed, layer, 1)) and evaluates the decoded model.
ArrayEvalResult array_backed_eval(const NetworkModel& model, const device::ProgrammingProfile& profile,
                                  const array::ReadConfig& read_cfg, const data::LabeledImages& test,
                                  std::uint64_t seed, unsigned threads = 1);

}  // namespace tnnsim::faults

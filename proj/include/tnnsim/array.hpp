#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tnnsim/device.hpp"
#include "tnnsim/pcsa.hpp"
#include "tnnsim/random.hpp"

namespace tnnsim::array {

/// One differential 2T2R synapse: the BL device and its complementary BLb device.
struct SynapsePair {
  double r_bl;
  double r_blb;
};

struct ReadConfig {
  double window = 70e-9;  ///< sense duration (s)
  pcsa::PcsaParams pcsa;

  void validate() const;
};

/// Programs a ternary weight: +1 -> LRS/HRS, -1 -> HRS/LRS, 0 -> HRS/HRS.
/// Throws DomainError for values outside {-1, 0, +1}.
SynapsePair encode(int weight, const device::ProgrammingProfile& profile, Rng& rng);

/// Senses the pair once: BL discharges first -> +1, BLb first -> -1, no
/// differentiation within the window -> 0.
int decode(const SynapsePair& pair, const ReadConfig& cfg, Rng& rng);

/// rows x cols synapse pairs with the weights they were programmed to.
class WeightArray {
 public:
  WeightArray() = default;
  WeightArray(std::size_t rows, std::size_t cols);

  /// Programs every weight in `weights` (row-major) through `encode`. Each element
  /// uses its own stream derived from (seed, row, col).
  static WeightArray program(std::size_t rows, std::size_t cols, std::span<const std::int8_t> weights,
                             const device::ProgrammingProfile& profile, std::uint64_t seed);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  const SynapsePair& pair(std::size_t r, std::size_t c) const { return pairs_[r * cols_ + c]; }
  std::int8_t true_weight(std::size_t r, std::size_t c) const { return weights_[r * cols_ + c]; }
  std::span<const std::int8_t> true_weights() const { return weights_; }
  std::span<const SynapsePair> pairs() const { return pairs_; }

  /// Stores a pair; resistances must be > 0 and the weight ternary.
  void set(std::size_t r, std::size_t c, std::int8_t weight, SynapsePair pair);

  /// `row,col,true_w,r_bl_ohm,r_blb_ohm`
  void write_csv(std::ostream& out) const;
  static WeightArray read_csv(std::istream& in);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<SynapsePair> pairs_;
  std::vector<std::int8_t> weights_;
};

/// Element-wise decode; element (r, c) draws from the stream derived from
/// (seed, r, c), so the result is independent of evaluation order.
std::vector<std::int8_t> read_array(const WeightArray& arr, const ReadConfig& cfg,
                                    std::uint64_t seed);

struct SweepPoint {
  double r_bl;
  double p_converged;
};

/// Fraction of `trials` sense operations on (r_bl, r_blb_fixed) that resolve
/// within `window`, for every r_bl. Uses cfg.pcsa; cfg.window is ignored.
std::vector<SweepPoint> convergence_sweep(double r_blb_fixed, std::span<const double> r_bl_values,
                                          double window, std::size_t trials, const ReadConfig& cfg,
                                          Rng& rng);

/// `r_bl_ohm,p_converged`
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> sweep);

struct ReadoutErrorStats {
  double type1_rate = 0.0;  ///< +1 <-> -1
  double type2_rate = 0.0;  ///< 0 <-> +-1
  std::size_t type1_count = 0;
  std::size_t type2_count = 0;
  std::size_t total = 0;
};

/// Throws DomainError when the sizes differ.
ReadoutErrorStats readout_error_stats(std::span<const std::int8_t> true_weights,
                                      std::span<const std::int8_t> decoded);

}  // namespace tnnsim::array

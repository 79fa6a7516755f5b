#include "tnnsim/array.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "tnnsim/csv.hpp"
#include "tnnsim/errors.hpp"

namespace tnnsim::array {

void ReadConfig::validate() const {
  if (!(window > 0.0) || !std::isfinite(window)) throw ConfigError("array: read window must be > 0");
  pcsa.validate();
}

SynapsePair encode(int weight, const device::ProgrammingProfile& profile, Rng& rng) {
  using device::DeviceMode;
  using device::program_cell;
  switch (weight) {
    case 1: {
      const double bl = program_cell(DeviceMode::LRS, profile, rng);
      return {bl, program_cell(DeviceMode::HRS, profile, rng)};
    }
    case -1: {
      const double bl = program_cell(DeviceMode::HRS, profile, rng);
      return {bl, program_cell(DeviceMode::LRS, profile, rng)};
    }
    case 0: {
      const double bl = program_cell(DeviceMode::HRS, profile, rng);
      return {bl, program_cell(DeviceMode::HRS, profile, rng)};
    }
    default:
      throw DomainError("array: cannot encode weight " + std::to_string(weight));
  }
}

int decode(const SynapsePair& pair, const ReadConfig& cfg, Rng& rng) {
  const pcsa::SenseOutcome out = pcsa::sense(pair.r_bl, pair.r_blb, cfg.pcsa, cfg.window, rng);
  if (!out.resolved) return 0;
  return out.winner == pcsa::Branch::BL ? 1 : -1;
}

WeightArray::WeightArray(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), pairs_(rows * cols, SynapsePair{1.0, 1.0}), weights_(rows * cols, 0) {}

WeightArray WeightArray::program(std::size_t rows, std::size_t cols,
                                 std::span<const std::int8_t> weights,
                                 const device::ProgrammingProfile& profile, std::uint64_t seed) {
  if (weights.size() != rows * cols) throw DomainError("array: weight count does not match shape");
  profile.validate();
  WeightArray arr(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      Rng rng = make_stream(seed, {r, c});
      const std::size_t k = r * cols + c;
      arr.pairs_[k] = encode(weights[k], profile, rng);
      arr.weights_[k] = weights[k];
    }
  }
  return arr;
}

void WeightArray::set(std::size_t r, std::size_t c, std::int8_t weight, SynapsePair pair) {
  if (r >= rows_ || c >= cols_) throw DomainError("array: index out of range");
  if (weight < -1 || weight > 1) throw DomainError("array: weight must be ternary");
  if (!(pair.r_bl > 0.0) || !(pair.r_blb > 0.0))
    throw DomainError("array: resistances must be > 0");
  pairs_[r * cols_ + c] = pair;
  weights_[r * cols_ + c] = weight;
}

void WeightArray::write_csv(std::ostream& out) const {
  out << "row,col,true_w,r_bl_ohm,r_blb_ohm\n";
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) {
      const SynapsePair& p = pair(r, c);
      out << r << ',' << c << ',' << int{true_weight(r, c)} << ',' << csv::num(p.r_bl) << ','
          << csv::num(p.r_blb) << '\n';
    }
}

WeightArray WeightArray::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "row,col,true_w,r_bl_ohm,r_blb_ohm")
    throw FormatError("array csv: missing header", 0);
  struct Row {
    std::size_t r, c;
    int w;
    SynapsePair p;
  };
  std::vector<Row> rows;
  std::size_t max_r = 0, max_c = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Row row{};
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ls >> row.r >> c1 >> row.c >> c2 >> row.w >> c3 >> row.p.r_bl >> c4 >> row.p.r_blb) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw FormatError("array csv: malformed line " + std::to_string(line_no), line_no);
    }
    max_r = std::max(max_r, row.r);
    max_c = std::max(max_c, row.c);
    rows.push_back(row);
  }
  if (rows.empty()) return {};
  WeightArray arr(max_r + 1, max_c + 1);
  if (rows.size() != arr.rows_ * arr.cols_) throw FormatError("array csv: incomplete grid", line_no);
  for (const Row& row : rows) arr.set(row.r, row.c, static_cast<std::int8_t>(row.w), row.p);
  return arr;
}

std::vector<std::int8_t> read_array(const WeightArray& arr, const ReadConfig& cfg,
                                    std::uint64_t seed) {
  cfg.validate();
  std::vector<std::int8_t> out(arr.rows() * arr.cols());
  for (std::size_t r = 0; r < arr.rows(); ++r)
    for (std::size_t c = 0; c < arr.cols(); ++c) {
      Rng rng = make_stream(seed, {r, c});
      out[r * arr.cols() + c] = static_cast<std::int8_t>(decode(arr.pair(r, c), cfg, rng));
    }
  return out;
}

std::vector<SweepPoint> convergence_sweep(double r_blb_fixed, std::span<const double> r_bl_values,
                                          double window, std::size_t trials, const ReadConfig& cfg,
                                          Rng& rng) {
  if (trials == 0) throw DomainError("convergence_sweep: trials must be >= 1");
  std::vector<SweepPoint> out;
  out.reserve(r_bl_values.size());
  for (double r_bl : r_bl_values) {
    std::size_t converged = 0;
    for (std::size_t t = 0; t < trials; ++t)
      converged += pcsa::sense(r_bl, r_blb_fixed, cfg.pcsa, window, rng).resolved ? 1 : 0;
    out.push_back({r_bl, static_cast<double>(converged) / static_cast<double>(trials)});
  }
  return out;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> sweep) {
  out << "r_bl_ohm,p_converged\n";
  for (const SweepPoint& p : sweep) out << csv::num(p.r_bl) << ',' << csv::num(p.p_converged) << '\n';
}

ReadoutErrorStats readout_error_stats(std::span<const std::int8_t> true_weights,
                                      std::span<const std::int8_t> decoded) {
  if (true_weights.size() != decoded.size())
    throw DomainError("readout_error_stats: shape mismatch");
  ReadoutErrorStats s;
  s.total = true_weights.size();
  for (std::size_t i = 0; i < s.total; ++i) {
    const int t = true_weights[i];
    const int d = decoded[i];
    if (t == d) continue;
    if (t != 0 && d != 0)
      ++s.type1_count;
    else
      ++s.type2_count;
  }
  if (s.total > 0) {
    s.type1_rate = static_cast<double>(s.type1_count) / static_cast<double>(s.total);
    s.type2_rate = static_cast<double>(s.type2_count) / static_cast<double>(s.total);
  }
  return s;
}

}  // namespace tnnsim::array

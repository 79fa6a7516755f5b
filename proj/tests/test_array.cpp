#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "tnnsim/array.hpp"
#include "tnnsim/errors.hpp"

using namespace tnnsim;
using namespace tnnsim::array;

namespace {

device::ProgrammingProfile nominal() { return device::ProgrammingProfile{}.deterministic(); }

ReadConfig read_cfg(double window, double jitter) {
  ReadConfig cfg;
  cfg.window = window;
  cfg.pcsa = pcsa::default_params(0.6);
  cfg.pcsa.jitter_sigma = jitter;
  return cfg;
}

}  // namespace

TEST(Array, EncodeExamples) {
  Rng rng(1);
  auto p = encode(1, nominal(), rng);
  EXPECT_EQ(p.r_bl, 20e3);
  EXPECT_EQ(p.r_blb, 350e3);
  p = encode(-1, nominal(), rng);
  EXPECT_EQ(p.r_bl, 350e3);
  EXPECT_EQ(p.r_blb, 20e3);
  p = encode(0, nominal(), rng);
  EXPECT_EQ(p.r_bl, 350e3);
  EXPECT_EQ(p.r_blb, 350e3);
  EXPECT_THROW(encode(2, nominal(), rng), DomainError);
}

TEST(Array, DecodeExamples) {
  Rng rng(1);
  const auto cfg = read_cfg(70e-9, pcsa::kDefaultJitterSigma);
  EXPECT_EQ(decode({20e3, 350e3}, cfg, rng), 1);
  EXPECT_EQ(decode({350e3, 20e3}, cfg, rng), -1);
  EXPECT_EQ(decode({320e3, 350e3}, cfg, rng), 0);
  EXPECT_EQ(decode({20e3, 20e3}, cfg, rng), 0);
}

TEST(Array, RoundTripAtNominalMedians) {
  Rng rng(1);
  const auto cfg = read_cfg(70e-9, 0.0);
  for (int w : {-1, 0, 1}) EXPECT_EQ(decode(encode(w, nominal(), rng), cfg, rng), w);
}

TEST(Array, DecodeAntisymmetric) {
  Rng rng(1);
  const auto cfg = read_cfg(70e-9, 0.0);
  for (double a : pcsa::log_grid(5e3, 2e6, 30))
    for (double b : pcsa::log_grid(5e3, 2e6, 30))
      ASSERT_EQ(decode({a, b}, cfg, rng), -decode({b, a}, cfg, rng));
}

TEST(Array, LowResistancePairDecodesByRace) {
  Rng rng(1);
  const auto cfg = read_cfg(70e-9, 0.0);
  EXPECT_EQ(decode({5e3, 20e3}, cfg, rng), 1);
  EXPECT_EQ(decode({20e3, 5e3}, cfg, rng), -1);
}

TEST(Array, DecodeMatchesRegionOracle) {
  const auto cfg = read_cfg(70e-9, 0.0);
  const auto& p = cfg.pcsa;
  const oracle::RaceParams rp{p.branch_capacitance, p.trip_fraction, p.min_differential, p.latch_delay};
  const auto grid = pcsa::log_grid(10e3, 1e6, 40);
  Rng rng(1);
  for (double a : grid)
    for (double b : grid) {
      int expect = 0;
      if (a != b && oracle::resolves_by(a, b, rp, cfg.window - p.latch_delay, 20000))
        expect = a < b ? 1 : -1;
      ASSERT_EQ(decode({a, b}, cfg, rng), expect) << a << " " << b;
    }
}

TEST(Array, RegionOraclesAgree) {
  for (double vdd : {0.6, 1.2}) {
    const auto& p = pcsa::default_params(vdd);
    const oracle::RaceParams rp{p.branch_capacitance, p.trip_fraction, p.min_differential, p.latch_delay};
    const auto grid = pcsa::log_grid(10e3, 1e6, 30);
    for (double t_end : {20e-9, 50e-9, 70e-9, 200e-9})
      for (double a : grid)
        for (double b : grid)
          ASSERT_EQ(oracle::resolves_by_analytic(a, b, rp, t_end), a != b && oracle::resolves_by(a, b, rp, t_end, 4000))
              << a << " " << b << " " << t_end;
  }
}

TEST(Array, ReadArrayRecoversProgrammedWeights) {
  std::vector<std::int8_t> w(12 * 9);
  Rng rng(4);
  for (auto& x : w) x = static_cast<std::int8_t>(static_cast<int>(rng() % 3) - 1);
  const auto arr = WeightArray::program(12, 9, w, nominal(), 7);
  const auto cfg = read_cfg(70e-9, 0.0);
  // element-wise deterministic decode as oracle
  Rng unused(0);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 0; c < 9; ++c) ASSERT_EQ(decode(arr.pair(r, c), cfg, unused), w[r * 9 + c]);
  EXPECT_EQ(read_array(arr, cfg, 1), w);
}

TEST(Array, AllZeroArrayReadsZero) {
  const std::vector<std::int8_t> w(50, 0);
  const auto arr = WeightArray::program(5, 10, w, nominal(), 1);
  EXPECT_EQ(read_array(arr, read_cfg(70e-9, 0.0), 9), w);
}

TEST(Array, ReadArraySeedDeterministic) {
  std::vector<std::int8_t> w(400);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<std::int8_t>(int(i % 3) - 1);
  const auto arr = WeightArray::program(20, 20, w, device::ProgrammingProfile{}, 3);
  const auto cfg = read_cfg(70e-9, 0.2);
  EXPECT_EQ(read_array(arr, cfg, 11), read_array(arr, cfg, 11));
}

TEST(Array, PartialConvergenceAtTransition) {
  // r_bl where the deterministic time crosses the 50 ns window for r_blb = 100k
  const auto& p = pcsa::default_params(0.6);
  double lo = 10e3, hi = 99e3;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pcsa::switching_time(mid, 100e3, p) <= 50e-9 ? lo : hi) = mid;
  }
  const double r_edge = lo;
  EXPECT_GT(r_edge, 30e3);
  EXPECT_LT(r_edge, 100e3);
  Rng rng(1);
  const auto cfg = read_cfg(50e-9, pcsa::kDefaultJitterSigma);
  int converged = 0;
  for (int t = 0; t < 100; ++t) converged += decode({r_edge, 100e3}, cfg, rng) != 0;
  EXPECT_GT(converged, 0);
  EXPECT_LT(converged, 100);
}

TEST(Array, ConvergenceSweepExamples) {
  ReadConfig cfg = read_cfg(50e-9, pcsa::kDefaultJitterSigma);
  Rng rng(1);
  const std::vector<double> r = {10e3, 100e3};
  const auto sweep = convergence_sweep(100e3, r, 50e-9, 100, cfg, rng);
  EXPECT_GE(sweep[0].p_converged, 0.95);
  EXPECT_EQ(sweep[1].p_converged, 0.0);
  cfg.pcsa.jitter_sigma = 0.0;
  EXPECT_EQ(convergence_sweep(100e3, std::vector<double>{100e3}, 50e-9, 10, cfg, rng)[0].p_converged, 0.0);
  EXPECT_THROW(convergence_sweep(100e3, r, 50e-9, 0, cfg, rng), DomainError);
}

TEST(Array, ConvergenceSweepMonotoneWithLargeTrials) {
  const auto cfg = read_cfg(50e-9, pcsa::kDefaultJitterSigma);
  Rng rng(5);
  const auto r = pcsa::log_grid(10e3, 120e3, 25);
  const std::size_t n = 4000;
  const auto sweep = convergence_sweep(100e3, r, 50e-9, n, cfg, rng);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double a = sweep[i - 1].p_converged, b = sweep[i].p_converged;
    const double sd = std::sqrt((a * (1 - a) + b * (1 - b)) / n);
    EXPECT_LE(b, a + 2 * sd + 1e-12) << r[i];
  }
  EXPECT_GT(sweep.front().p_converged, sweep.back().p_converged);
}

TEST(Array, SweepCsv) {
  std::ostringstream os;
  const std::vector<SweepPoint> s = {{10e3, 1.0}, {1e5, 0.25}};
  write_sweep_csv(os, s);
  EXPECT_EQ(os.str(), "r_bl_ohm,p_converged\n10000,1\n1e+05,0.25\n");
}

TEST(Array, ReadoutErrorStatsExamples) {
  const std::vector<std::int8_t> a = {1, 0, -1};
  auto s = readout_error_stats(a, a);
  EXPECT_EQ(s.type1_rate, 0.0);
  EXPECT_EQ(s.type2_rate, 0.0);
  const std::vector<std::int8_t> plus(8, 1), minus(8, -1);
  s = readout_error_stats(plus, minus);
  EXPECT_EQ(s.type1_rate, 1.0);
  EXPECT_EQ(s.type2_rate, 0.0);
  s = readout_error_stats(a, std::vector<std::int8_t>{1, 1, 0});
  EXPECT_EQ(s.type1_rate, 0.0);
  EXPECT_DOUBLE_EQ(s.type2_rate, 2.0 / 3.0);
  EXPECT_EQ(s.type2_count, 2u);
  EXPECT_EQ(s.total, 3u);
  EXPECT_THROW(readout_error_stats(a, plus), DomainError);
}

TEST(Array, ReadoutRatesBounded) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int8_t> t(17), d(17);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = static_cast<std::int8_t>(int(rng() % 3) - 1);
      d[i] = static_cast<std::int8_t>(int(rng() % 3) - 1);
    }
    const auto s = readout_error_stats(t, d);
    ASSERT_GE(s.type1_rate, 0.0);
    ASSERT_GE(s.type2_rate, 0.0);
    ASSERT_LE(s.type1_rate + s.type2_rate, 1.0 + 1e-12);
  }
}

TEST(Array, CsvRoundTrip) {
  std::vector<std::int8_t> w = {1, -1, 0, 0, 1, -1};
  const auto arr = WeightArray::program(2, 3, w, device::ProgrammingProfile{}, 5);
  std::stringstream ss;
  arr.write_csv(ss);
  const auto back = WeightArray::read_csv(ss);
  ASSERT_EQ(back.rows(), 2u);
  ASSERT_EQ(back.cols(), 3u);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(back.true_weight(r, c), arr.true_weight(r, c));
      EXPECT_EQ(back.pair(r, c).r_bl, arr.pair(r, c).r_bl);
      EXPECT_EQ(back.pair(r, c).r_blb, arr.pair(r, c).r_blb);
    }
  std::istringstream bad("row,col,true_w,r_bl_ohm,r_blb_ohm\n0,0,1,abc,3\n");
  EXPECT_THROW(WeightArray::read_csv(bad), FormatError);
}

TEST(Array, SetValidates) {
  WeightArray arr(2, 2);
  EXPECT_THROW(arr.set(2, 0, 0, {1, 1}), DomainError);
  EXPECT_THROW(arr.set(0, 0, 2, {1, 1}), DomainError);
  EXPECT_THROW(arr.set(0, 0, 0, {0, 1}), DomainError);
  EXPECT_THROW(read_cfg(0.0, 0.0).validate(), ConfigError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fixtures.hpp"
#include "tnnsim/errors.hpp"
#include "tnnsim/faults.hpp"
#include "tnnsim/trainer.hpp"

using namespace tnnsim;
using namespace tnnsim::faults;

namespace {

const train::TrainResult& toy_model() {
  static const train::TrainResult r = [] {
    const auto d = fixtures::toy_dataset(4, 512, 200, 21);
    train::TrainConfig cfg;
    cfg.arch = "d64,d4";
    cfg.epochs = 3;
    cfg.batch_size = 32;
    return train::train(cfg, d);
  }();
  return r;
}

const data::Dataset& toy_data() {
  static const data::Dataset d = fixtures::toy_dataset(4, 512, 200, 21);
  return d;
}

array::ReadConfig read_cfg(double jitter) {
  array::ReadConfig cfg;
  cfg.pcsa = pcsa::default_params(0.6);
  cfg.pcsa.jitter_sigma = jitter;
  return cfg;
}

}  // namespace

TEST(Inject, NoErrorsIsIdentity) {
  const std::vector<std::int8_t> v = {1, -1, 0, 0, 1, 1, -1};
  const TernaryTensor t({7}, v);
  Rng rng(1);
  EXPECT_EQ(inject(t, {}, rng), t);
}

TEST(Inject, TypeOneFlipsSignsOnly) {
  const std::vector<std::int8_t> v = {1, -1, 0};
  Rng rng(1);
  EXPECT_EQ(inject(TernaryTensor({3}, v), {1.0, 0.0, 0}, rng).values(), (std::vector<std::int8_t>{-1, 1, 0}));
}

TEST(Inject, TypeTwoRateConcentrates) {
  std::vector<std::int8_t> v(1000000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int8_t>(int(i % 3) - 1);
  const TernaryTensor t({v.size()}, v);
  Rng rng(3);
  const auto out = inject(t, {0.0, 0.1, 0}, rng).values();
  std::size_t changed = 0, from_zero = 0, to_plus = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (out[i] == v[i]) continue;
    ++changed;
    ASSERT_TRUE(out[i] == 0 || v[i] == 0) << "type 2 must not switch signs";
    if (v[i] == 0) {
      ++from_zero;
      to_plus += out[i] == 1;
    }
  }
  EXPECT_NEAR(static_cast<double>(changed) / v.size(), 0.1, 0.001);
  EXPECT_NEAR(static_cast<double>(to_plus) / from_zero, 0.5, 0.01);
}

TEST(Inject, TypeOneRateConcentrates) {
  std::vector<std::int8_t> v(300000, 1);
  Rng rng(4);
  const auto out = inject(TernaryTensor({v.size()}, v), {0.05, 0.0, 0}, rng).values();
  std::size_t flipped = 0;
  for (auto x : out) flipped += x == -1;
  EXPECT_NEAR(static_cast<double>(flipped) / v.size(), 0.05, 0.002);
}

TEST(Inject, BinaryIgnoresTypeTwo) {
  std::vector<std::int8_t> v(1000, -1);
  Rng rng(5);
  const auto out = inject(TernaryTensor({1000}, v), {0.0, 1.0, 0}, rng, true);
  EXPECT_EQ(out.values(), v);
}

TEST(Inject, PreservesShapeAndDomain) {
  std::vector<std::int8_t> v(4 * 3 * 3 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int8_t>(int(i % 3) - 1);
  const TernaryTensor t({4, 3, 3, 3}, v);
  Rng rng(6);
  const auto out = inject(t, {0.3, 0.4, 0}, rng);
  EXPECT_EQ(out.shape(), t.shape());
  for (auto x : out.values()) ASSERT_TRUE(x >= -1 && x <= 1);
  EXPECT_THROW(inject(t, {1.5, 0.0, 0}, rng), ConfigError);
  EXPECT_THROW(inject(t, {0.0, -0.1, 0}, rng), ConfigError);
}

TEST(Inject, ModelCopyUntouched) {
  const auto& m = toy_model().model;
  const auto before = std::get<DenseLayer>(m.layers.front()).weights;
  Rng rng(7);
  const auto corrupted = inject_model(m, {0.2, 0.2, 0}, rng);
  EXPECT_EQ(std::get<DenseLayer>(m.layers.front()).weights, before);
  EXPECT_FALSE(std::get<DenseLayer>(corrupted.layers.front()).weights == before);
}

TEST(Sweep, ZeroRateEqualsCleanAccuracy) {
  const auto& m = toy_model().model;
  const auto& d = toy_data();
  const double clean = accuracy(infer(m, d.test.images, d.test.count()), d.test.labels);
  const std::vector<double> rates = {0.0, 0.01, 0.3};
  for (int type : {1, 2}) {
    const auto r = ber_sweep(m, d.test, rates, type, 3, 9);
    ASSERT_EQ(r.rows.size(), 9u);
    ASSERT_EQ(r.summary.size(), 3u);
    EXPECT_EQ(r.summary[0].mean_acc, clean);
    EXPECT_EQ(r.summary[0].sd_acc, 0.0);
    EXPECT_EQ(r.summary[0].error_type, type);
  }
  EXPECT_THROW(ber_sweep(m, d.test, rates, 3, 1, 1), ConfigError);
  EXPECT_THROW(ber_sweep(m, d.test, rates, 1, 0, 1), ConfigError);
}

TEST(Sweep, MonotoneWithinNoise) {
  const auto& m = toy_model().model;
  const auto& d = toy_data();
  const auto grid = default_ber_grid();
  ASSERT_EQ(grid.size(), 13u);
  EXPECT_NEAR(grid.front(), 1e-4, 1e-18);
  EXPECT_NEAR(grid.back(), 1e-1, 1e-15);
  const auto r = ber_sweep(m, d.test, grid, 1, 10, 3);
  for (std::size_t i = 1; i < r.summary.size(); ++i) {
    const auto& a = r.summary[i - 1];
    const auto& b = r.summary[i];
    const double tol = 2.0 * std::hypot(a.sd_acc, b.sd_acc) / std::sqrt(10.0);
    EXPECT_LE(b.mean_acc, a.mean_acc + tol + 1e-12) << b.ber;
  }
}

TEST(Sweep, SeedDeterministic) {
  const auto& m = toy_model().model;
  const std::vector<double> rates = {0.05, 0.2};
  const auto a = ber_sweep(m, toy_data().test, rates, 2, 2, 4);
  const auto b = ber_sweep(m, toy_data().test, rates, 2, 2, 4, 3);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].accuracy, b.rows[i].accuracy);
}

TEST(Sweep, DropBer) {
  const std::vector<SweepSummary> s = {{1, 1e-3, 0.98, 0}, {1, 1e-2, 0.96, 0}, {1, 1e-1, 0.90, 0}};
  EXPECT_NEAR(drop_ber(s, 0.98, 0.05), std::exp(std::log(1e-2) + (0.03 / 0.06) * std::log(10.0)), 1e-12);
  EXPECT_EQ(drop_ber(s, 0.98, 0.0), 1e-3);
  EXPECT_TRUE(std::isinf(drop_ber(s, 0.98, 0.2)));
}

TEST(Sweep, Csv) {
  std::ostringstream a, b;
  write_sweep_csv(a, std::vector<SweepRow>{{2, 0.01, 3, 0.5}});
  EXPECT_EQ(a.str(), "error_type,ber,run,accuracy\n2,0.01,3,0.5\n");
  write_summary_csv(b, std::vector<SweepSummary>{{1, 0.001, 0.75, 0.125}});
  EXPECT_EQ(b.str(), "error_type,ber,mean_acc,sd_acc\n1,0.001,0.75,0.125\n");
}

TEST(ArrayEval, ZeroVarianceEqualsClean) {
  const auto& m = toy_model().model;
  const auto& d = toy_data();
  const double clean = accuracy(infer(m, d.test.images, d.test.count()), d.test.labels);
  const auto r = array_backed_eval(m, device::ProgrammingProfile{}.deterministic(), read_cfg(0.0), d.test, 1);
  EXPECT_EQ(r.accuracy, clean);
  EXPECT_EQ(r.stats.type1_count, 0u);
  EXPECT_EQ(r.stats.type2_count, 0u);
  EXPECT_EQ(r.per_layer.size(), 2u);
}

TEST(ArrayEval, StatsMatchIndependentDecode) {
  const auto& m = toy_model().model;
  const auto cfg = read_cfg(pcsa::kDefaultJitterSigma);
  const device::ProgrammingProfile prof;
  const std::uint64_t seed = 17;
  const auto r = array_backed_eval(m, prof, cfg, toy_data().test, seed);
  std::size_t t1 = 0, t2 = 0, total = 0, layer_pos = 0;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto* dl = std::get_if<DenseLayer>(&m.layers[i]);
    if (!dl) continue;
    const auto truth = dl->weights.values();
    const auto arr = array::WeightArray::program(dl->out, dl->in, truth, prof, derive_seed(seed, {i, 0}));
    const auto dec = array::read_array(arr, cfg, derive_seed(seed, {i, 1}));
    std::size_t l1 = 0, l2 = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (truth[k] == -dec[k] && truth[k] != 0) ++l1;
      if ((truth[k] == 0) != (dec[k] == 0)) ++l2;
    }
    EXPECT_EQ(r.per_layer[layer_pos].type1_count, l1);
    EXPECT_EQ(r.per_layer[layer_pos].type2_count, l2);
    ++layer_pos;
    t1 += l1;
    t2 += l2;
    total += truth.size();
  }
  EXPECT_EQ(r.stats.type1_count, t1);
  EXPECT_EQ(r.stats.type2_count, t2);
  EXPECT_EQ(r.stats.total, total);
  EXPECT_LE(r.stats.type1_rate, r.stats.type2_rate);
}

// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select
// criteria by number, e.g. `tnnsim_acceptance 1 5 6`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tnnsim/array.hpp"
#include "tnnsim/config.hpp"
#include "tnnsim/data.hpp"
#include "tnnsim/errors.hpp"
#include "tnnsim/faults.hpp"
#include "tnnsim/model.hpp"
#include "tnnsim/model_io.hpp"
#include "tnnsim/network.hpp"
#include "tnnsim/pcsa.hpp"
#include "tnnsim/ternary.hpp"
#include "tnnsim/tnn.hpp"
#include "tnnsim/trainer.hpp"

using namespace tnnsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: truth tables -------------------------------------------------------

Outcome truth_tables() {
  const int xnor_table[2][2] = {{1, -1}, {-1, 1}};
  const int gxnor_table[3][3] = {{1, 0, -1}, {0, 0, 0}, {-1, 0, 1}};
  std::size_t checked = 0, wrong = 0;
  for (int w : {-1, 1})
    for (int x : {-1, 1}) {
      ++checked;
      wrong += xnor(w, x) != xnor_table[(w + 1) / 2][(x + 1) / 2];
    }
  for (int w = -1; w <= 1; ++w)
    for (int x = -1; x <= 1; ++x) {
      ++checked;
      wrong += gxnor(w, x) != gxnor_table[w + 1][x + 1];
    }
  std::size_t rejected = 0;
  for (auto [w, x] : {std::pair{0, 1}, {1, 0}, {0, 0}, {-1, 0}}) {
    try {
      xnor(w, x);
    } catch (const DomainError&) {
      ++rejected;
    }
  }
  return {wrong == 0 && rejected == 4,
          fmt("%zu/%zu table entries match, %zu/4 undefined xnor inputs rejected", checked - wrong, checked, rejected)};
}

// --- 2: calibration --------------------------------------------------------

Outcome calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = pcsa::calibrate_builtin(0.6);
  const double runtime = seconds_since(t0);
  const double fast = pcsa::switching_time(20e3, 350e3, result.params) * 1e9;
  const double slow = pcsa::switching_time(320e3, 350e3, result.params) * 1e9;
  const bool pass = fast >= 40 && fast <= 60 && slow >= 160 && slow <= 240 && runtime < 1.0;
  return {pass, fmt("t(20k,350k)=%.2f ns, t(320k,350k)=%.2f ns, fit %.3f s", fast, slow, runtime)};
}

// --- 3: near-threshold slow region -----------------------------------------

Outcome slow_region() {
  const auto grid = pcsa::log_grid(10e3, 1e6, 50);
  std::size_t count[2];
  const double vdds[2] = {0.6, 1.2};
  for (int k = 0; k < 2; ++k) {
    const auto& p = pcsa::default_params(vdds[k]);
    // counted directly, not through SwitchingMap
    count[k] = 0;
    for (double a : grid)
      for (double b : grid) count[k] += pcsa::switching_time(a, b, p) > 70e-9;
  }
  return {count[0] > count[1], fmt("cells above 70 ns: %zu at 0.6 V, %zu at 1.2 V", count[0], count[1])};
}

// --- 4: convergence sweep --------------------------------------------------

Outcome convergence_sweep() {
  const config::Config cfg;
  const auto read_cfg = config::read_config(cfg);
  const auto r_bl = cfg.get_doubles("array.sweep_r_bl");
  const std::size_t trials = 100;
  Rng rng(derive_seed(1, {4}));
  const auto sweep = array::convergence_sweep(100e3, r_bl, 50e-9, trials, read_cfg, rng);
  bool pass = true;
  double min_low = 1.0, max_high = 0.0;
  for (const auto& pt : sweep) {
    if (pt.r_bl <= 30e3) min_low = std::min(min_low, pt.p_converged);
    if (pt.r_bl >= 100e3) max_high = std::max(max_high, pt.p_converged);
  }
  pass = min_low >= 0.95 && max_high <= 0.05;
  std::size_t violations = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double p0 = sweep[i - 1].p_converged, p1 = sweep[i].p_converged;
    const double sd = std::sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / trials);
    violations += p1 > p0 + 2 * sd + 1e-12;
  }
  pass = pass && violations == 0;
  std::ostringstream curve;
  for (const auto& pt : sweep) curve << ' ' << pt.r_bl / 1e3 << "k:" << pt.p_converged;
  return {pass, fmt("min p(r_bl<=30k)=%.2f, max p(r_bl>=100k)=%.2f, %zu monotonicity violations;", min_low,
                    max_high, violations) +
                    curve.str()};
}

// --- 5: decode oracle ------------------------------------------------------

Outcome decode_oracle() {
  const auto grid = pcsa::log_grid(5e3, 2e6, 100);
  std::size_t agree = 0, total = 0;
  for (double vdd : {0.6, 1.2}) {
    array::ReadConfig cfg;
    cfg.pcsa = pcsa::default_params(vdd);
    cfg.pcsa.jitter_sigma = 0.0;
    const auto& p = cfg.pcsa;
    const oracle::RaceParams rp{p.branch_capacitance, p.trip_fraction, p.min_differential, p.latch_delay};
    Rng rng(5);
    for (double a : grid)
      for (double b : grid) {
        int expect = 0;
        if (oracle::resolves_by_analytic(a, b, rp, cfg.window - p.latch_delay)) expect = a < b ? 1 : -1;
        agree += array::decode({a, b}, cfg, rng) == expect;
        ++total;
      }
  }
  return {agree == total, fmt("%zu/%zu cells agree (100x100 grid at 0.6 V and 1.2 V)", agree, total)};
}

// --- 6: dot product --------------------------------------------------------

TernaryTensor vec(const std::vector<std::int8_t>& v) { return TernaryTensor({v.size()}, v); }

Outcome dot_product() {
  std::size_t pairs = 0, mismatches = 0;
  for (std::size_t n = 0; n <= 8; ++n) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    std::vector<std::vector<std::int8_t>> all(combos, std::vector<std::int8_t>(n));
    for (std::size_t k = 0; k < combos; ++k) {
      std::size_t z = k;
      for (std::size_t i = 0; i < n; ++i, z /= 3) all[k][i] = static_cast<std::int8_t>(static_cast<int>(z % 3) - 1);
    }
    std::vector<TernaryTensor> packed;
    for (const auto& v : all) packed.push_back(vec(v));
    for (std::size_t a = 0; a < combos; ++a)
      for (std::size_t b = 0; b < combos; ++b, ++pairs)
        mismatches += gxnor_dot(packed[a], packed[b]) != oracle::naive_dot(all[a], all[b]);
  }
  std::mt19937_64 rng(2024);
  std::size_t random_mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::int8_t> a(1024), b(1024);
    for (auto& x : a) x = static_cast<std::int8_t>(static_cast<int>(rng() % 3) - 1);
    for (auto& x : b) x = static_cast<std::int8_t>(static_cast<int>(rng() % 3) - 1);
    random_mismatches += gxnor_dot(vec(a), vec(b)) != oracle::naive_dot(a, b);
  }
  return {mismatches == 0 && random_mismatches == 0,
          fmt("%zu exhaustive pairs (length 0..8), %zu mismatches; 1000 random length-1024 pairs, %zu mismatches",
              pairs, mismatches, random_mismatches)};
}

// --- 7: gradient check -----------------------------------------------------

Outcome gradient_check() {
  const auto d = fixtures::toy_dataset(3, 12, 3, 3);
  train::QuantConfig q;
  q.surrogate = true;
  train::Network<double> net(d.shape, "d6,d3", q, 11);
  const auto x = train::Network<double>::to_batch(d.train.images, 12);
  net.forward(x, d.train.labels, true);
  net.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : net.params()) analytic.emplace_back(p.grad, p.grad + p.size);

  const double h = 1e-6;
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  auto ps = net.params();
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (std::size_t i = 0; i < ps[k].size; ++i) {
      double& w = ps[k].value[i];
      const double w0 = w;
      if (ps[k].latent && std::abs(std::abs(w0) - 1.0) < 10 * h) {
        ++skipped;
        continue;
      }
      w = w0 + h;
      const double up = net.forward(x, d.train.labels, true);
      w = w0 - h;
      const double down = net.forward(x, d.train.labels, true);
      w = w0;
      const double fd = (up - down) / (2 * h);
      const double g = analytic[k][i];
      worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-3}));
      ++checked;
    }
  return {checked > 100 && worst < 1e-4,
          fmt("%zu entries, worst relative error %.3g (%zu entries on the clip kink skipped)", checked, worst, skipped)};
}

// --- 8, 9, 10: trained MNIST network ---------------------------------------

const data::Dataset& mnist() {
  static const data::Dataset d = data::load_mnist(TNNSIM_MNIST_DIR);
  return d;
}

struct Trained {
  train::TrainResult result;
  double seconds;
};

const Trained& reference_tnn() {
  static const Trained t = [] {
    train::TrainConfig cfg;  // 784-512-512-10, 30 epochs
    cfg.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = train::train(cfg, mnist(), [](const train::EpochMetrics& m) {
      std::printf("  [tnn seed 1] epoch %zu test accuracy %.4f\n", m.epoch, m.test_accuracy);
      std::fflush(stdout);
    });
    return Trained{std::move(r), seconds_since(t0)};
  }();
  return t;
}

constexpr std::size_t kComparisonEpochs = 5;

Outcome desk_training() {
  const auto& ref = reference_tnn();
  const bool reaches = ref.result.max_test_accuracy >= 0.97 && ref.seconds < 1800;
  double mean[2] = {0, 0};
  std::string per_seed;
  for (int m = 0; m < 2; ++m)
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      train::TrainConfig cfg;
      cfg.mode = m == 0 ? train::Mode::TNN : train::Mode::BNN;
      cfg.epochs = kComparisonEpochs;
      cfg.seed = seed;
      const double acc = train::train(cfg, mnist()).max_test_accuracy;
      std::printf("  [%s seed %llu, %zu epochs] max test accuracy %.4f\n", m == 0 ? "tnn" : "bnn",
                  static_cast<unsigned long long>(seed), kComparisonEpochs, acc);
      std::fflush(stdout);
      mean[m] += acc / 3;
    }
  return {reaches && mean[0] >= mean[1],
          fmt("30-epoch TNN max %.4f (epoch %zu, %.0f s); %zu-epoch 3-seed means TNN %.4f, BNN %.4f",
              ref.result.max_test_accuracy, ref.result.best_epoch, ref.seconds, kComparisonEpochs, mean[0], mean[1])};
}

Outcome error_asymmetry() {
  const auto& model = reference_tnn().result.model;
  const auto& test = mnist().test;
  const double clean = accuracy(infer(model, test.images, test.count()), test.labels);
  // the default 1e-4..1e-1 grid at four points per decade, continued to 10^-0.25
  const auto rates = pcsa::log_grid(1e-4, std::pow(10.0, -0.25), 16);
  double ber[3];
  for (int type : {1, 2}) {
    const auto sweep = faults::ber_sweep(model, test, rates, type, 5, 9, 1);
    ber[type] = faults::drop_ber(sweep.summary, clean, 0.05);
  }
  const double factor = ber[2] / ber[1];
  std::size_t nonzero = 0, weights = 0;
  for (const auto& layer : model.layers)
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      nonzero += d->weights.count_nonzero();
      weights += d->weights.size();
    }
  return {std::isfinite(ber[1]) && factor >= 5.0,
          fmt("clean %.4f, 5-point drop at type-1 BER %.3g and type-2 BER %.3g, factor %.2f (nonzero weights %.3f)",
              clean, ber[1], ber[2], factor, static_cast<double>(nonzero) / weights)};
}

Outcome array_inference() {
  const auto& model = reference_tnn().result.model;
  const auto& test = mnist().test;
  const double clean = accuracy(infer(model, test.images, test.count()), test.labels);
  const config::Config cfg;

  auto ideal_read = config::read_config(cfg);
  ideal_read.pcsa.jitter_sigma = 0.0;
  const auto ideal =
      faults::array_backed_eval(model, config::programming_profile(cfg).deterministic(), ideal_read, test, 3);
  const bool exact = ideal.accuracy == clean && ideal.stats.type1_count == 0 && ideal.stats.type2_count == 0;

  double type1 = 0, type2 = 0;
  const std::size_t runs = 5;
  for (std::uint64_t seed = 1; seed <= runs; ++seed) {
    const auto r = faults::array_backed_eval(model, config::programming_profile(cfg), config::read_config(cfg), test,
                                             seed);
    type1 += r.stats.type1_rate / runs;
    type2 += r.stats.type2_rate / runs;
  }
  return {exact && type1 <= type2,
          fmt("ideal array: accuracy %.4f vs clean %.4f, %zu readout errors; default variability over %zu seeds: "
              "type1 %.3g, type2 %.3g",
              ideal.accuracy, clean, ideal.stats.type1_count + ideal.stats.type2_count, runs, type1, type2)};
}

// --- 11: CLI reproducibility -----------------------------------------------

Outcome cli_reproducibility() {
  const fs::path root = cli_runner::fresh_dir("tnnsim_acceptance_cli");
  const std::vector<std::string> common = {
      "--seed",  "11", "--set", std::string("data.dir=") + TNNSIM_MNIST_DIR, "--set", "train.train_limit=3000",
      "--set",   "train.epochs=2", "--set", "data.test_limit=1000", "--set", "faults.runs=2", "--set",
      "faults.ber_grid=0.001,0.01,0.1", "--set", "faults.array_runs=2"};
  auto args = [&](const fs::path& out, std::vector<std::string> cmd) {
    std::vector<std::string> a = {"--out-dir", out.string()};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), cmd.begin(), cmd.end());
    return a;
  };
  const fs::path model_dir = root / "model";
  fs::create_directories(model_dir);
  if (cli_runner::run(args(model_dir, {"train"}), root / "train.log").code != 0)
    return {false, "training the model for the model-based subcommands failed"};
  const std::string model = (model_dir / "model.tnn").string();

  const std::vector<std::vector<std::string>> commands = {
      {"calibrate"}, {"--vdd", "1.2", "calibrate"}, {"map"}, {"sense-sweep"}, {"train"},
      {"eval", "--model", model}, {"inject-sweep", "--model", model}, {"array-eval", "--model", model}};
  std::size_t identical = 0, files = 0;
  std::string failures;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::map<std::string, std::string> snap[2];
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path d = root / fmt("run%zu_%d", c, rep);
      fs::create_directories(d);
      const auto r = cli_runner::run(args(d, commands[c]), root / "cli.log");
      ok = ok && r.code == 0;
      snap[rep] = cli_runner::snapshot(d);
    }
    const std::string name = commands[c].size() > 1 && commands[c][0] == "--vdd" ? "calibrate@1.2V" : commands[c][0];
    if (ok && !snap[0].empty() && snap[0] == snap[1]) {
      ++identical;
      files += snap[0].size();
    } else {
      failures += " " + name;
    }
  }
  return {identical == commands.size(),
          fmt("%zu/%zu subcommand runs byte-identical across %zu output files", identical, commands.size(), files) +
              (failures.empty() ? std::string() : "; differing:" + failures)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"truth tables", truth_tables},
      {"PCSA calibration", calibration},
      {"near-threshold slow region", slow_region},
      {"convergence sweep", convergence_sweep},
      {"decode oracle equivalence", decode_oracle},
      {"GXNOR dot-product equivalence", dot_product},
      {"STE gradient check", gradient_check},
      {"desk-scale MNIST training", desk_training},
      {"error-type asymmetry", error_asymmetry},
      {"array-backed inference", array_inference},
      {"CLI reproducibility", cli_reproducibility},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::strtoul(argv[i], nullptr, 10));

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

// Experiment runner: every study is a subcommand writing CSV files into the
// output directory. Exit codes: 0 success, 2 configuration error, 3 failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tnnsim/array.hpp"
#include "tnnsim/config.hpp"
#include "tnnsim/csv.hpp"
#include "tnnsim/data.hpp"
#include "tnnsim/errors.hpp"
#include "tnnsim/faults.hpp"
#include "tnnsim/model_io.hpp"
#include "tnnsim/pcsa.hpp"
#include "tnnsim/trainer.hpp"

namespace fs = std::filesystem;
using namespace tnnsim;

namespace {

constexpr int kConfigExit = 2;
constexpr int kFailureExit = 3;

struct Context {
  config::Config cfg;
  std::uint64_t seed = 1;
  fs::path out_dir;

  std::string provenance() const {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
    return std::string("# tnnsim ") + TNNSIM_VERSION + " seed=" + std::to_string(seed) + " config=" + hash;
  }

  /// Opens out_dir/name and writes the provenance comment line.
  std::ofstream open(const std::string& name) const {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / name);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
    out << provenance() << '\n';
    return out;
  }

  fs::path path(const std::string& name) const { return out_dir / name; }
};

std::string volt_tag(double vdd) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gV", vdd);
  return buf;
}

std::vector<pcsa::Anchor> read_anchors(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open anchors file " + path.string());
  std::string line;
  std::vector<pcsa::Anchor> out;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "r_bl_ohm,r_blb_ohm,vdd_v,target_ns")
        throw ConfigError(path.string() + ": expected header r_bl_ohm,r_blb_ohm,vdd_v,target_ns");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    pcsa::Anchor a{};
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ls >> a.r_bl >> c1 >> a.r_blb >> c2 >> a.vdd >> c3 >> a.target_time) || c1 != ',' || c2 != ',' ||
        c3 != ',')
      throw ConfigError(path.string() + ": malformed line '" + line + "'");
    a.target_time *= 1e-9;
    out.push_back(a);
  }
  return out;
}

/// Parameters at `vdd`: the calibrated file if it was made for that voltage,
/// else the built-in set.
pcsa::PcsaParams params_at(const config::Config& cfg, double vdd) {
  config::Config c = cfg;
  c.set("pcsa.vdd", csv::num(vdd));
  const std::string file = c.get("pcsa.params_file");
  if (!file.empty() && config::read_params_file(file).vdd != vdd) c.set("pcsa.params_file", "");
  return config::pcsa_params(c);
}

data::Dataset load_dataset(const config::Config& cfg) {
  const std::string format = cfg.get("data.format");
  data::Dataset d;
  if (format == "mnist")
    d = data::load_mnist(cfg.get("data.dir"));
  else if (format == "cifar10")
    d = data::load_cifar10(cfg.get("data.dir"));
  else
    throw ConfigError("data.format: expected mnist or cifar10, got '" + format + "'");
  if (const std::size_t limit = cfg.get_size("data.test_limit"); limit > 0)
    d.test = data::head(d.test, limit, d.shape.size());
  return d;
}

int cmd_calibrate(const Context& ctx) {
  const double vdd = ctx.cfg.get_double("pcsa.vdd");
  const std::string anchors_file = ctx.cfg.get("pcsa.anchors_file");
  const std::string tag = volt_tag(vdd);
  pcsa::CalibrationResult result;
  try {
    if (anchors_file.empty()) {
      result = pcsa::calibrate_builtin(vdd);
    } else {
      const std::vector<pcsa::Anchor> anchors = read_anchors(anchors_file);
      pcsa::PcsaParams init;
      init.vdd = anchors.empty() ? vdd : anchors.front().vdd;
      result = pcsa::calibrate(anchors, pcsa::FreeParams{}, init);
    }
  } catch (const CalibrationError& e) {
    std::ofstream rep = ctx.open("residuals_" + tag + ".csv");
    rep << e.report();
    std::cerr << "calibrate: " << e.what() << "\n" << e.report();
    return kFailureExit;
  }
  result.params.jitter_sigma = ctx.cfg.get_double("pcsa.jitter_sigma");
  {
    std::ofstream out = ctx.open("pcsa_params_" + tag + ".txt");
    config::write_params_file(out, result.params);
  }
  {
    std::ofstream out = ctx.open("residuals_" + tag + ".csv");
    pcsa::write_residual_report(out, result);
  }
  std::cout << "calibrate " << tag << ": max |residual| " << csv::num(100 * result.max_abs_rel_error()) << " %\n";
  if (!result.within_tolerance())
    std::cerr << "calibrate: residuals above " << 100 * pcsa::CalibrationResult::kSoftTolerance
              << " % but within " << 100 * pcsa::CalibrationResult::kHardTolerance << " %\n";
  return 0;
}

int cmd_map(const Context& ctx, std::optional<double> vdd_flag) {
  const std::vector<double> vdds = vdd_flag ? std::vector<double>{*vdd_flag} : ctx.cfg.get_doubles("array.map_vdds");
  const std::vector<double> grid = pcsa::log_grid(ctx.cfg.get_double("array.map_r_min"),
                                                  ctx.cfg.get_double("array.map_r_max"),
                                                  ctx.cfg.get_size("array.map_points"));
  const double threshold = ctx.cfg.get_double("array.map_threshold_ns") * 1e-9;
  std::ofstream summary = ctx.open("map_summary.csv");
  summary << "vdd_v,threshold_ns,slow_cells,total_cells\n";
  for (double vdd : vdds) {
    const pcsa::SwitchingMap map = pcsa::switching_time_map(grid, params_at(ctx.cfg, vdd));
    std::ofstream out = ctx.open("switching_map_" + volt_tag(vdd) + ".csv");
    pcsa::write_map_csv(out, map);
    const std::size_t slow = map.count_slower_than(threshold, grid.front(), grid.back());
    summary << csv::num(vdd) << ',' << csv::num(threshold * 1e9) << ',' << slow << ',' << map.times.size() << '\n';
    std::cout << "map " << volt_tag(vdd) << ": " << slow << " of " << map.times.size() << " cells slower than "
              << csv::num(threshold * 1e9) << " ns\n";
  }
  return 0;
}

int cmd_sense_sweep(const Context& ctx) {
  array::ReadConfig rc;
  rc.pcsa = config::pcsa_params(ctx.cfg);
  const double window = ctx.cfg.get_double("array.sweep_window_ns") * 1e-9;
  const std::vector<double> r_bl = ctx.cfg.get_doubles("array.sweep_r_bl");
  const std::size_t trials = ctx.cfg.get_size("array.sweep_trials");
  if (trials == 0) throw ConfigError("array.sweep_trials must be >= 1");
  if (!(window > 0)) throw ConfigError("array.sweep_window_ns must be > 0");
  Rng rng = make_stream(ctx.seed, {});
  const auto sweep = array::convergence_sweep(ctx.cfg.get_double("array.sweep_r_blb"), r_bl, window, trials, rc, rng);
  std::ofstream out = ctx.open("sense_sweep.csv");
  array::write_sweep_csv(out, sweep);
  return 0;
}

int cmd_train(const Context& ctx) {
  train::TrainConfig tc = config::train_config(ctx.cfg);
  tc.seed = ctx.seed;
  tc.checkpoint = ctx.path("checkpoint.tns");
  const data::Dataset ds = load_dataset(ctx.cfg);
  fs::create_directories(ctx.out_dir);
  const train::TrainResult r = train::train(tc, ds, [](const train::EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << " loss " << csv::num(m.train_loss) << " test_accuracy "
              << csv::num(m.test_accuracy) << std::endl;
  });
  {
    std::ofstream out = ctx.open("metrics.csv");
    train::write_metrics_csv(out, r.metrics);
  }
  save_model(r.model, ctx.path("model.tnn"));
  std::cout << "max test accuracy " << csv::num(r.max_test_accuracy) << " at epoch " << r.best_epoch << "\n";
  return 0;
}

NetworkModel require_model(const std::string& path) {
  if (path.empty()) throw ConfigError("--model is required");
  if (!fs::exists(path)) throw std::runtime_error("model file not found: " + path);
  return load_model(path);
}

unsigned threads(const config::Config& cfg) {
  return static_cast<unsigned>(std::max<std::size_t>(1, cfg.get_size("train.threads")));
}

int cmd_eval(const Context& ctx, const std::string& model_path) {
  const NetworkModel model = require_model(model_path);
  const data::Dataset ds = load_dataset(ctx.cfg);
  const InferenceResult r = infer(model, ds.test.images, ds.test.count(), threads(ctx.cfg));
  const double acc = accuracy(r, ds.test.labels);
  std::ofstream out = ctx.open("eval.csv");
  out << "test_count,correct,accuracy\n";
  out << ds.test.count() << ',' << static_cast<std::size_t>(std::llround(acc * static_cast<double>(ds.test.count())))
      << ',' << csv::num(acc) << '\n';
  std::cout << "test accuracy " << csv::num(acc) << "\n";
  return 0;
}

int cmd_inject_sweep(const Context& ctx, const std::string& model_path) {
  const NetworkModel model = require_model(model_path);
  const data::Dataset ds = load_dataset(ctx.cfg);
  std::vector<double> rates = ctx.cfg.get_doubles("faults.ber_grid");
  if (rates.empty()) rates = faults::default_ber_grid();
  const std::size_t runs = ctx.cfg.get_size("faults.runs");
  const double clean = accuracy(infer(model, ds.test.images, ds.test.count(), threads(ctx.cfg)), ds.test.labels);
  std::vector<faults::SweepRow> rows;
  std::vector<faults::SweepSummary> summary;
  for (double t : ctx.cfg.get_doubles("faults.error_types")) {
    if (t != 1.0 && t != 2.0) throw ConfigError("faults.error_types: expected 1 and/or 2");
    const int type = static_cast<int>(t);
    const faults::SweepResult r = faults::ber_sweep(model, ds.test, rates, type, runs, ctx.seed, threads(ctx.cfg));
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
    summary.insert(summary.end(), r.summary.begin(), r.summary.end());
    std::cout << "type " << type << ": 5-point drop at BER " << csv::num(faults::drop_ber(r.summary, clean, 0.05))
              << "\n";
  }
  {
    std::ofstream out = ctx.open("ber_runs.csv");
    faults::write_sweep_csv(out, rows);
  }
  std::ofstream out = ctx.open("ber_summary.csv");
  faults::write_summary_csv(out, summary);
  return 0;
}

int cmd_array_eval(const Context& ctx, const std::string& model_path) {
  const NetworkModel model = require_model(model_path);
  const data::Dataset ds = load_dataset(ctx.cfg);
  const device::ProgrammingProfile profile = config::programming_profile(ctx.cfg);
  const array::ReadConfig rc = config::read_config(ctx.cfg);
  const double clean = accuracy(infer(model, ds.test.images, ds.test.count(), threads(ctx.cfg)), ds.test.labels);
  std::ofstream out = ctx.open("array_eval.csv");
  out << "run,accuracy,clean_accuracy,type1_rate,type2_rate,type1_count,type2_count,total\n";
  const std::size_t runs = ctx.cfg.get_size("faults.array_runs");
  for (std::size_t k = 0; k < runs; ++k) {
    const faults::ArrayEvalResult r =
        faults::array_backed_eval(model, profile, rc, ds.test, derive_seed(ctx.seed, {k}), threads(ctx.cfg));
    out << k << ',' << csv::num(r.accuracy) << ',' << csv::num(clean) << ',' << csv::num(r.stats.type1_rate) << ','
        << csv::num(r.stats.type2_rate) << ',' << r.stats.type1_count << ',' << r.stats.type2_count << ','
        << r.stats.total << '\n';
    std::cout << "run " << k << ": accuracy " << csv::num(r.accuracy) << " (clean " << csv::num(clean)
              << "), type1 " << csv::num(r.stats.type1_rate) << ", type2 " << csv::num(r.stats.type2_rate) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ternary/binary neural network and 2T2R RRAM sense-amplifier simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::optional<double> vdd;
  std::optional<double> window_ns;
  std::vector<std::string> overrides;
  std::string model_path;

  app.add_option("--config", config_path, "experiment config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master random seed")->capture_default_str();
  app.add_option("--out-dir", out_dir, "output directory (default: $TNNSIM_OUT_DIR or .)");
  app.add_option("--vdd", vdd, "supply voltage (V)");
  app.add_option("--window-ns", window_ns, "sense window (ns) for sense-sweep and array-eval");
  app.add_option("--set", overrides, "override a config key: section.key=value");

  auto* calibrate = app.add_subcommand("calibrate", "fit PCSA parameters to the timing anchors");
  auto* map = app.add_subcommand("map", "switching-time map over (r_bl, r_blb)");
  auto* sweep = app.add_subcommand("sense-sweep", "convergence probability versus r_bl");
  auto* trn = app.add_subcommand("train", "train a TNN/BNN and export the integer model");
  auto* eval = app.add_subcommand("eval", "test accuracy of a model file");
  auto* inject = app.add_subcommand("inject-sweep", "accuracy versus type-1/type-2 bit error rate");
  auto* arr = app.add_subcommand("array-eval", "accuracy with weights read through the 2T2R array");
  for (auto* sub : {eval, inject, arr}) sub->add_option("--model", model_path, "model file (.tnn)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  Context ctx;
  try {
    if (!config_path.empty()) ctx.cfg = config::Config::load(config_path);
    for (const std::string& o : overrides) ctx.cfg.set_assignment(o);
    if (vdd) ctx.cfg.set("pcsa.vdd", csv::num(*vdd));
    if (window_ns) {
      ctx.cfg.set("array.window_ns", csv::num(*window_ns));
      ctx.cfg.set("array.sweep_window_ns", csv::num(*window_ns));
    }
    ctx.seed = seed;
    if (!out_dir.empty())
      ctx.out_dir = out_dir;
    else if (const char* env = std::getenv("TNNSIM_OUT_DIR"); env && *env)
      ctx.out_dir = env;
    else
      ctx.out_dir = ".";

    if (*calibrate) return cmd_calibrate(ctx);
    if (*map) return cmd_map(ctx, vdd);
    if (*sweep) return cmd_sense_sweep(ctx);
    if (*trn) return cmd_train(ctx);
    if (*eval) return cmd_eval(ctx, model_path);
    if (*inject) return cmd_inject_sweep(ctx, model_path);
    if (*arr) return cmd_array_eval(ctx, model_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailureExit;
  }
  return kConfigExit;
}

#include "tnnsim/faults.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "tnnsim/csv.hpp"
#include "tnnsim/errors.hpp"

namespace tnnsim::faults {

void ErrorSpec::validate() const {
  if (!(type1_rate >= 0.0 && type1_rate <= 1.0)) throw ConfigError("faults: type1_rate must be in [0, 1]");
  if (!(type2_rate >= 0.0 && type2_rate <= 1.0)) throw ConfigError("faults: type2_rate must be in [0, 1]");
}

TernaryTensor inject(const TernaryTensor& weights, const ErrorSpec& spec, Rng& rng, bool binary) {
  spec.validate();
  TernaryTensor out = weights;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int v = out.get(i);
    if (u(rng) < spec.type1_rate && v != 0) v = -v;
    if (!binary && u(rng) < spec.type2_rate) v = v != 0 ? 0 : (sign(rng) ? 1 : -1);
    out.set(i, v);
  }
  return out;
}

NetworkModel inject_model(const NetworkModel& model, const ErrorSpec& spec, Rng& rng) {
  const bool binary = model.is_binary();
  NetworkModel out = model;
  for (Layer& layer : out.layers) {
    if (auto* c = std::get_if<ConvLayer>(&layer)) c->weights = inject(c->weights, spec, rng, binary);
    if (auto* d = std::get_if<DenseLayer>(&layer)) d->weights = inject(d->weights, spec, rng, binary);
  }
  return out;
}

std::vector<double> default_ber_grid() {
  std::vector<double> g;
  for (int k = 0; k < 13; ++k) g.push_back(std::pow(10.0, -4.0 + 3.0 * k / 12.0));
  return g;
}

SweepResult ber_sweep(const NetworkModel& model, const data::LabeledImages& test, std::span<const double> rates,
                      int error_type, std::size_t runs, std::uint64_t seed, unsigned threads) {
  if (error_type != 1 && error_type != 2) throw ConfigError("faults: error type must be 1 or 2");
  if (runs == 0) throw ConfigError("faults: runs must be >= 1");
  model.validate();
  SweepResult res;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    ErrorSpec spec;
    (error_type == 1 ? spec.type1_rate : spec.type2_rate) = rates[i];
    spec.seed = seed;
    spec.validate();
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < runs; ++k) {
      Rng rng = make_stream(seed, {static_cast<std::uint64_t>(error_type), i, k});
      const NetworkModel corrupted = inject_model(model, spec, rng);
      const double acc = accuracy(infer(corrupted, test.images, test.count(), threads), test.labels);
      res.rows.push_back({error_type, rates[i], k, acc});
      sum += acc;
      sq += acc * acc;
    }
    const double n = static_cast<double>(runs);
    const double mean = sum / n;
    const double var = runs > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1)) : 0.0;
    res.summary.push_back({error_type, rates[i], mean, std::sqrt(var)});
  }
  return res;
}

double drop_ber(std::span<const SweepSummary> summary, double clean_accuracy, double drop) {
  const double target = clean_accuracy - drop;
  for (std::size_t i = 0; i < summary.size(); ++i) {
    if (summary[i].mean_acc > target) continue;
    if (i == 0 || summary[i - 1].ber <= 0.0) return summary[i].ber;
    const double a0 = summary[i - 1].mean_acc, a1 = summary[i].mean_acc;
    const double l0 = std::log(summary[i - 1].ber), l1 = std::log(summary[i].ber);
    const double f = a0 == a1 ? 1.0 : (a0 - target) / (a0 - a1);
    return std::exp(l0 + std::clamp(f, 0.0, 1.0) * (l1 - l0));
  }
  return std::numeric_limits<double>::infinity();
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "error_type,ber,run,accuracy\n";
  for (const SweepRow& r : rows)
    out << r.error_type << ',' << csv::num(r.ber) << ',' << r.run << ',' << csv::num(r.accuracy) << '\n';
}

void write_summary_csv(std::ostream& out, std::span<const SweepSummary> summary) {
  out << "error_type,ber,mean_acc,sd_acc\n";
  for (const SweepSummary& s : summary)
    out << s.error_type << ',' << csv::num(s.ber) << ',' << csv::num(s.mean_acc) << ',' << csv::num(s.sd_acc)
        << '\n';
}

namespace {

void add(array::ReadoutErrorStats& into, const array::ReadoutErrorStats& s) {
  into.type1_count += s.type1_count;
  into.type2_count += s.type2_count;
  into.total += s.total;
  if (into.total > 0) {
    into.type1_rate = static_cast<double>(into.type1_count) / static_cast<double>(into.total);
    into.type2_rate = static_cast<double>(into.type2_count) / static_cast<double>(into.total);
  }
}

TernaryTensor through_array(const TernaryTensor& w, std::size_t rows, const device::ProgrammingProfile& profile,
                            const array::ReadConfig& cfg, std::uint64_t seed, std::size_t layer,
                            ArrayEvalResult& res) {
  const std::size_t cols = w.size() / rows;
  const std::vector<std::int8_t> truth = w.values();
  const array::WeightArray arr = array::WeightArray::program(rows, cols, truth, profile, derive_seed(seed, {layer, 0}));
  const std::vector<std::int8_t> decoded = array::read_array(arr, cfg, derive_seed(seed, {layer, 1}));
  const array::ReadoutErrorStats s = array::readout_error_stats(truth, decoded);
  res.per_layer.push_back(s);
  add(res.stats, s);
  return TernaryTensor(w.shape(), decoded);
}

}  // namespace

ArrayEvalResult array_backed_eval(const NetworkModel& model, const device::ProgrammingProfile& profile,
                                  const array::ReadConfig& read_cfg, const data::LabeledImages& test,
                                  std::uint64_t seed, unsigned threads) {
  profile.validate();
  read_cfg.validate();
  model.validate();
  ArrayEvalResult res;
  NetworkModel decoded = model;
  for (std::size_t i = 0; i < decoded.layers.size(); ++i) {
    Layer& layer = decoded.layers[i];
    if (auto* c = std::get_if<ConvLayer>(&layer))
      c->weights = through_array(c->weights, c->out_c, profile, read_cfg, seed, i, res);
    if (auto* d = std::get_if<DenseLayer>(&layer))
      d->weights = through_array(d->weights, d->out, profile, read_cfg, seed, i, res);
  }
  res.accuracy = accuracy(infer(decoded, test.images, test.count(), threads), test.labels);
  return res;
}

}  // namespace tnnsim::faults

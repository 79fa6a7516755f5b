#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tnnsim/csv.hpp"
#include "tnnsim/errors.hpp"
#include "tnnsim/network.hpp"
#include "tnnsim/trainer.hpp"

namespace tnnsim::train {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (!(weight_delta >= 0.0) || !(act_delta >= 0.0)) throw ConfigError("train: deltas must be >= 0");
  if (augment.max_rotation_deg < 0.0) throw ConfigError("train: rotation bound must be >= 0");
  schedule.validate();
  adam.validate();
  parse_arch(arch);
}

TrainResult train(const TrainConfig& cfg, const data::Dataset& dataset,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  dataset.validate();
  const std::size_t img = dataset.shape.size();
  const std::size_t n_train =
      cfg.train_limit == 0 ? dataset.train.count() : std::min(cfg.train_limit, dataset.train.count());
  if (n_train == 0) throw ConfigError("train: empty training split");
  if (dataset.test.count() == 0) throw ConfigError("train: empty test split");

  Network<float> net(dataset.shape, cfg.arch, {cfg.mode, cfg.weight_delta, cfg.act_delta, false},
                     derive_seed(cfg.seed, {0}));
  if (net.num_classes() != dataset.num_classes)
    throw ConfigError("train: arch emits " + std::to_string(net.num_classes()) + " classes, dataset has " +
                      std::to_string(dataset.num_classes));

  const std::size_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  TrainResult result;
  auto evaluate = [&](std::size_t epoch, double loss, double lr) {
    NetworkModel model = net.export_model();
    const InferenceResult r = infer(model, dataset.test.images, dataset.test.count(), cfg.eval_threads);
    const EpochMetrics m{epoch, loss, accuracy(r, dataset.test.labels), lr};
    result.metrics.push_back(m);
    if (result.metrics.size() == 1 || m.test_accuracy > result.max_test_accuracy) {
      result.max_test_accuracy = m.test_accuracy;
      result.best_epoch = epoch;
      result.model = std::move(model);
    }
    if (on_epoch) on_epoch(m);
  };
  evaluate(0, std::nan(""), lr_schedule(0, cfg.schedule, steps_per_epoch));

  std::vector<std::size_t> order(n_train);
  std::vector<std::uint8_t> batch_px, batch_lab;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, {1, epoch});
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    const double lr_first = lr_schedule(net.step_count(), cfg.schedule, steps_per_epoch);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t begin = s * cfg.batch_size, end = std::min(n_train, begin + cfg.batch_size);
      batch_px.clear();
      batch_lab.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        const auto px = std::span<const std::uint8_t>(dataset.train.images).subspan(i * img, img);
        if (cfg.augment.enabled) {
          const std::vector<std::uint8_t> a = augment(px, dataset.shape, rng, cfg.augment);
          batch_px.insert(batch_px.end(), a.begin(), a.end());
        } else {
          batch_px.insert(batch_px.end(), px.begin(), px.end());
        }
        batch_lab.push_back(dataset.train.labels[i]);
      }
      const double lr = lr_schedule(net.step_count(), cfg.schedule, steps_per_epoch);
      const float loss = net.forward(Network<float>::to_batch(batch_px, end - begin), batch_lab, true);
      if (!std::isfinite(loss))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(s));
      net.backward();
      net.adam_update(lr, cfg.adam);
      loss_sum += loss;
    }
    evaluate(epoch, loss_sum / static_cast<double>(steps_per_epoch), lr_first);
    if (!cfg.checkpoint.empty()) net.save_checkpoint(cfg.checkpoint);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics) {
  out << "epoch,train_loss,test_accuracy,lr\n";
  for (const EpochMetrics& m : metrics)
    out << m.epoch << ',' << csv::num(m.train_loss) << ',' << csv::num(m.test_accuracy) << ',' << csv::num(m.lr)
        << '\n';
}

}  // namespace tnnsim::train

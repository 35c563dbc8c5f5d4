#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "pcnn/csv.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/network.hpp"

namespace pcnn {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamParams p = {}) : p_(p) {}

  void step(ParameterStore& store, const std::vector<ParamId>& ids) {
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
    for (ParamId id : ids) {
      Parameter& p = store.at(id);
      auto& [m, v] = slots_[id];
      if (m.size() == 0) {
        m = RMat::Zero(p.value.rows(), p.value.cols());
        v = RMat::Zero(p.value.rows(), p.value.cols());
      }
      m = p_.beta1 * m + (1.0 - p_.beta1) * p.grad;
      v = p_.beta2 * v + (1.0 - p_.beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          p_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + p_.epsilon);
    }
  }

 private:
  AdamParams p_;
  long t_ = 0;
  std::map<ParamId, std::pair<RMat, RMat>> slots_;
};

struct TrainSpec {
  int batch_size = 8;
  int epochs = 80;
  AdamParams adam{};
  uint64_t seed = 1;
  long max_train = 0;  // 0 = whole set
  long max_test = 0;
  bool calibrate_scale = true;
  int calibration_batch = 64;
  int eval_batch = 256;
  bool verbose = false;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  EpochStats final_stats;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  long samples = 0;
  Eigen::MatrixXi confusion;  // rows: true label, cols: prediction
};

inline EvalResult evaluate(Network& net, const Dataset& data,
                           long max_samples = 0, int batch_size = 256) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  if (batch_size < 1) throw ConfigError("evaluate: batch size must be >= 1");
  const long total = max_samples > 0 ? std::min(max_samples, data.size())
                                     : data.size();
  const int classes = net.config().output_size();
  EvalResult res;
  res.confusion = Eigen::MatrixXi::Zero(classes, classes);
  res.samples = total;
  long correct = 0;
  double loss_sum = 0.0;
  std::vector<long> idx(static_cast<size_t>(batch_size));
  for (long at = 0; at < total; at += batch_size) {
    const long n = std::min<long>(batch_size, total - at);
    idx.resize(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), at);
    const CMat x = data.batch(idx);
    const std::vector<int> y = data.label_batch(idx);
    BatchResult r = net.batch(x, y, /*with_grad=*/false);
    loss_sum += r.loss * static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const int truth = y[static_cast<size_t>(i)];
      const int pred = r.predictions[static_cast<Eigen::Index>(i)];
      res.confusion(truth, pred) += 1;
      if (truth == pred) ++correct;
    }
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  res.mean_loss = loss_sum / static_cast<double>(total);
  return res;
}

/// Minibatch Adam training with a fixed shuffling schedule derived from
/// spec.seed.  Metrics per epoch: running loss/accuracy over the training
/// pass plus a full test-subset evaluation.  A non-finite loss aborts with
/// DivergenceError carrying the epoch and batch index.
inline TrainReport train(Network& net, const Dataset& train_data,
                         const Dataset& test_data, const TrainSpec& spec) {
  if (train_data.size() == 0) throw DataError("train: empty training set");
  if (spec.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (spec.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  const long total = spec.max_train > 0
                         ? std::min<long>(spec.max_train, train_data.size())
                         : train_data.size();
  std::vector<long> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), 0L);
  std::mt19937_64 rng(spec.seed);

  if (spec.calibrate_scale) {
    const long n = std::min<long>(spec.calibration_batch, total);
    std::vector<long> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0L);
    net.calibrate_output_scale(train_data.batch(idx));
  }

  Adam opt(spec.adam);
  const std::vector<ParamId> trainable = net.params().trainable_ids();
  if (trainable.empty()) throw ConfigError("train: nothing is trainable");

  TrainReport report;
  for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long correct = 0, seen = 0, batch_no = 0;
    for (long at = 0; at < total; at += spec.batch_size, ++batch_no) {
      const long n = std::min<long>(spec.batch_size, total - at);
      const std::span<const long> idx(order.data() + at,
                                      static_cast<size_t>(n));
      const CMat x = train_data.batch(idx);
      const std::vector<int> y = train_data.label_batch(idx);
      net.params().zero_grad();
      BatchResult r;
      try {
        r = net.batch(x, y, /*with_grad=*/true);
      } catch (const NumericalError& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what(),
                              epoch, batch_no);
      }
      if (!std::isfinite(r.loss))
        throw DivergenceError("training diverged: non-finite loss", epoch,
                              batch_no);
      opt.step(net.params(), trainable);
      loss_sum += r.loss * static_cast<double>(n);
      seen += n;
      for (long i = 0; i < n; ++i)
        if (r.predictions[static_cast<Eigen::Index>(i)] ==
            y[static_cast<size_t>(i)])
          ++correct;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(seen);
    if (test_data.size() > 0) {
      const EvalResult ev =
          evaluate(net, test_data, spec.max_test, spec.eval_batch);
      stats.test_loss = ev.mean_loss;
      stats.test_accuracy = ev.accuracy;
    }
    if (spec.verbose)
      std::fprintf(stderr,
                   "epoch %3d  train_loss %.4f  train_acc %.4f  test_acc %.4f\n",
                   epoch, stats.train_loss, stats.train_accuracy,
                   stats.test_accuracy);
    report.epochs.push_back(stats);
  }
  report.final_stats = report.epochs.back();
  return report;
}

/// CSV: one row per epoch plus a trailing summary row labelled "final".
inline void write_train_csv(const std::filesystem::path& path,
                            const TrainReport& report) {
  CsvWriter csv(path);
  csv.row({"epoch", "train_loss", "train_accuracy", "test_loss",
           "test_accuracy"});
  auto emit = [&](const std::string& tag, const EpochStats& s) {
    csv.row({tag, format_full(s.train_loss), format_full(s.train_accuracy),
             format_full(s.test_loss), format_full(s.test_accuracy)});
  };
  for (const EpochStats& s : report.epochs) emit(std::to_string(s.epoch), s);
  emit("final", report.final_stats);
}

}  // namespace pcnn

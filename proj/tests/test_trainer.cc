// Minibatch training loop: determinism, learning on a toy problem,
// memorisation capacity, divergence reporting, and the metrics CSV.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/network.hpp"
#include "pcnn/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace pcnn;

namespace {

NetworkConfig dense_toy_config(uint64_t seed) {
  NetworkConfig cfg;
  cfg.stack = {LayerSpec{LayerSpec::Kind::fc, 40, 16},
               LayerSpec{LayerSpec::Kind::fc, 16, 10}};
  cfg.seed = seed;
  return cfg;
}

NetworkConfig optical_toy_config(uint64_t seed) {
  NetworkConfig cfg;
  cfg.stack = {LayerSpec{LayerSpec::Kind::conv, 40, 20},
               LayerSpec{LayerSpec::Kind::fc, 20, 10}};
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Evaluate, BatchSizeDoesNotChangeTheAnswer) {
  Network net(dense_toy_config(3));
  const Dataset data = testutil::toy_dataset(40, 37, 5);
  const EvalResult a = evaluate(net, data, 0, 37);
  const EvalResult b = evaluate(net, data, 0, 4);
  const EvalResult c = evaluate(net, data, 0, 1);
  EXPECT_EQ(a.samples, 37);
  EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
  EXPECT_DOUBLE_EQ(a.accuracy, c.accuracy);
  EXPECT_NEAR(a.mean_loss, b.mean_loss, 1e-12);
  EXPECT_EQ(a.confusion, b.confusion);
}

TEST(Evaluate, ConfusionMatrixAccountsForEverySample) {
  Network net(dense_toy_config(3));
  const Dataset data = testutil::toy_dataset(40, 50, 7);
  const EvalResult res = evaluate(net, data);
  ASSERT_EQ(res.confusion.rows(), 10);
  ASSERT_EQ(res.confusion.cols(), 10);
  EXPECT_EQ(res.confusion.sum(), 50);
  // Row sums are the per-class sample counts (50 samples, labels i % 10).
  for (int k = 0; k < 10; ++k) EXPECT_EQ(res.confusion.row(k).sum(), 5);
  EXPECT_DOUBLE_EQ(
      res.accuracy,
      static_cast<double>(res.confusion.diagonal().sum()) / 50.0);
}

TEST(Evaluate, MaxSamplesTruncatesTheSet) {
  Network net(dense_toy_config(3));
  const Dataset data = testutil::toy_dataset(40, 50, 7);
  const EvalResult res = evaluate(net, data, 12);
  EXPECT_EQ(res.samples, 12);
  EXPECT_EQ(res.confusion.sum(), 12);
}

TEST(Evaluate, RejectsBadArguments) {
  Network net(dense_toy_config(3));
  const Dataset data = testutil::toy_dataset(40, 10, 7);
  EXPECT_THROW(evaluate(net, Dataset{}), DataError);
  EXPECT_THROW(evaluate(net, data, 0, 0), ConfigError);
}

TEST(Train, DeterministicForAGivenSeed) {
  const Dataset train_set = testutil::toy_dataset(40, 64, 11);
  const Dataset test_set = testutil::toy_dataset(40, 32, 12);
  TrainSpec spec;
  spec.epochs = 3;
  spec.seed = 21;

  auto run = [&]() {
    Network net(dense_toy_config(9));
    return train(net, train_set, test_set, spec);
  };
  const TrainReport a = run();
  const TrainReport b = run();
  ASSERT_EQ(a.epochs.size(), 3u);
  for (size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_EQ(a.epochs[e].train_loss, b.epochs[e].train_loss);
    EXPECT_EQ(a.epochs[e].test_accuracy, b.epochs[e].test_accuracy);
  }
  EXPECT_EQ(a.final_stats.train_loss, a.epochs.back().train_loss);

  // A different shuffle seed visits batches in a different order.
  TrainSpec other = spec;
  other.seed = 22;
  Network net(dense_toy_config(9));
  const TrainReport c = train(net, train_set, test_set, other);
  EXPECT_NE(a.epochs.front().train_loss, c.epochs.front().train_loss);
}

TEST(Train, LearnsSegmentedToyClasses) {
  const Dataset train_set = testutil::toy_dataset(40, 200, 31);
  const Dataset test_set = testutil::toy_dataset(40, 100, 32);
  Network net(dense_toy_config(13));
  TrainSpec spec;
  spec.epochs = 15;
  spec.seed = 2;
  const TrainReport report = train(net, train_set, test_set, spec);
  EXPECT_GE(report.final_stats.train_accuracy, 0.95);
  EXPECT_GE(report.final_stats.test_accuracy, 0.9);
  // Loss went down substantially from the first epoch.
  EXPECT_LT(report.final_stats.train_loss,
            0.5 * report.epochs.front().train_loss);
}

TEST(Train, OpticalStackLearnsTheToyProblemToo) {
  const Dataset train_set = testutil::toy_dataset(40, 200, 41);
  const Dataset test_set = testutil::toy_dataset(40, 100, 42);
  Network net(optical_toy_config(17));
  TrainSpec spec;
  spec.epochs = 20;
  spec.seed = 3;
  const TrainReport report = train(net, train_set, test_set, spec);
  EXPECT_GE(report.final_stats.test_accuracy, 0.8);
}

TEST(Train, MaxTrainMatchesTrimmedDataset) {
  // Limiting via max_train must behave exactly like shrinking the dataset:
  // same index pool, same shuffles, bit-identical updates.
  const Dataset big = testutil::toy_dataset(40, 64, 51);
  Dataset small = big;
  small.images = big.images.leftCols(16).eval();
  small.labels.assign(big.labels.begin(), big.labels.begin() + 16);

  TrainSpec spec;
  spec.epochs = 2;
  spec.seed = 5;
  spec.calibrate_scale = false;
  TrainSpec limited = spec;
  limited.max_train = 16;

  Network a(dense_toy_config(19)), b(dense_toy_config(19));
  const TrainReport ra = train(a, big, Dataset{}, limited);
  const TrainReport rb = train(b, small, Dataset{}, spec);
  for (size_t e = 0; e < ra.epochs.size(); ++e) {
    EXPECT_EQ(ra.epochs[e].train_loss, rb.epochs[e].train_loss);
    EXPECT_EQ(ra.epochs[e].train_accuracy, rb.epochs[e].train_accuracy);
  }
  for (ParamId id : a.params().all_ids())
    EXPECT_EQ(
        (a.params().at(id).value - b.params().at(id).value).cwiseAbs().maxCoeff(),
        0.0);
}

TEST(Train, NonFiniteLossRaisesDivergenceErrorWithLocation) {
  // Astronomically bright input overflows the detected powers; the loop must
  // stop at the first poisoned batch and say where it was.
  Dataset train_set = testutil::toy_dataset(40, 16, 61);
  train_set.images.array() *= 1e200;
  Network net(dense_toy_config(23));
  TrainSpec spec;
  spec.epochs = 2;
  spec.calibrate_scale = false;
  try {
    train(net, train_set, Dataset{}, spec);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch, 1);
    EXPECT_EQ(e.batch, 0);
  }
}

TEST(Train, ValidatesSpecAndData) {
  const Dataset data = testutil::toy_dataset(40, 16, 71);
  Network net(dense_toy_config(29));
  TrainSpec bad_batch;
  bad_batch.batch_size = 0;
  EXPECT_THROW(train(net, data, Dataset{}, bad_batch), ConfigError);
  TrainSpec bad_epochs;
  bad_epochs.epochs = 0;
  EXPECT_THROW(train(net, data, Dataset{}, bad_epochs), ConfigError);
  EXPECT_THROW(train(net, Dataset{}, Dataset{}, TrainSpec{}), DataError);

  for (ParamId id : net.params().all_ids())
    net.params().at(id).trainable = false;
  EXPECT_THROW(train(net, data, Dataset{}, TrainSpec{}), ConfigError);
}

TEST(Train, CalibrationRunsBeforeTheFirstUpdate) {
  const Dataset data = testutil::toy_dataset(40, 32, 81);
  NetworkConfig cfg = dense_toy_config(31);
  Network calibrated(cfg), manual(cfg);

  // Reproduce the trainer's calibration by hand, then freeze the scale on
  // both sides; the first-epoch losses must agree bit for bit.
  std::vector<long> head(32);
  std::iota(head.begin(), head.end(), 0L);
  manual.calibrate_output_scale(data.batch(head));
  manual.params().at(manual.output_scale_id()).trainable = false;
  calibrated.params().at(calibrated.output_scale_id()).trainable = false;

  TrainSpec with_cal;
  with_cal.epochs = 1;
  with_cal.seed = 9;
  with_cal.calibration_batch = 64;  // clamped to the 32 available samples
  TrainSpec no_cal = with_cal;
  no_cal.calibrate_scale = false;

  const TrainReport ra = train(calibrated, data, Dataset{}, with_cal);
  const TrainReport rb = train(manual, data, Dataset{}, no_cal);
  EXPECT_EQ(ra.epochs.front().train_loss, rb.epochs.front().train_loss);
}

TEST(Train, MemorisesThirtyTwoRealDigits) {
  const char* env = std::getenv("PCNN_DATA_DIR");
  fs::path root = env ? fs::path(env) : fs::path("data/mnist");
  if (!fs::exists(root / "train-images-idx3-ubyte.gz") &&
      !fs::exists(root / "train-images-idx3-ubyte")) {
    GTEST_SKIP() << "dataset directory not present";
  }
  const MnistData mnist = load_mnist(root);
  NetworkConfig cfg = preset_config("pcnn-112-16");
  cfg.seed = 1;
  Network net(cfg);
  TrainSpec spec;
  spec.epochs = 200;
  spec.seed = 1;
  spec.max_train = 32;
  const TrainReport report = train(net, mnist.train, Dataset{}, spec);
  EXPECT_DOUBLE_EQ(report.final_stats.train_accuracy, 1.0)
      << "a 32-sample subset should be memorised after 200 epochs";
}

TEST(TrainCsv, OneRowPerEpochPlusFinal) {
  TrainReport report;
  for (int e = 1; e <= 2; ++e) {
    EpochStats s;
    s.epoch = e;
    s.train_loss = 0.5 / e;
    s.train_accuracy = 0.25 * e;
    s.test_loss = 0.75 / e;
    s.test_accuracy = 0.3 * e;
    report.epochs.push_back(s);
  }
  report.final_stats = report.epochs.back();

  const fs::path path =
      fs::temp_directory_path() / "pcnn_train_csv_test.csv";
  write_train_csv(path, report);
  std::ifstream in(path);
  ASSERT_TRUE(in.good());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,train_loss,train_accuracy,test_loss,test_accuracy");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "1,");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "2,");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 6), "final,");
  // Values survive the round trip at full precision.
  std::stringstream row(line.substr(6));
  std::string cell;
  std::getline(row, cell, ',');
  EXPECT_EQ(std::stod(cell), 0.25);
  std::getline(in, line);
  EXPECT_TRUE(line.empty());
  fs::remove(path);
}

TEST(Adam, FirstStepHasBiasCorrectedMagnitude) {
  ParameterStore store;
  const ParamId id = store.add("w", RMat::Zero(1, 1));
  store.at(id).grad(0, 0) = 2.0;
  AdamParams p;
  p.lr = 1e-3;
  Adam opt(p);
  opt.step(store, {id});
  // After bias correction the first update is lr * sign(grad) up to epsilon.
  EXPECT_NEAR(store.at(id).value(0, 0), -1e-3, 1e-8);

  // Opposite gradient moves the value back up.
  store.at(id).grad(0, 0) = -2.0;
  opt.step(store, {id});
  EXPECT_GT(store.at(id).value(0, 0), -1e-3);
}

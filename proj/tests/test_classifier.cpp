#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "neuroadapt/conflict_classifier.hpp"

using namespace neuroadapt;
using namespace neuroadapt::clf;

namespace {

const op::SyntheticEEGConfig kEeg{};

// One model shared by the tests that only need a trained classifier.
const ClassifierModel& trained_model() {
  static const ClassifierModel model = train(make_synthetic_dataset(kEeg, {200, 50, 0}, 31), 31).model;
  return model;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.max_epochs = 15;
  return c;
}

}  // namespace

TEST(DecideClass, ArgmaxAndSafeTieBreak) {
  EXPECT_EQ(decide_class(std::vector<double>{0.1, 0.2, 0.7}), ConflictClass::sudden);
  EXPECT_EQ(decide_class(std::vector<double>{0.6, 0.3, 0.1}), ConflictClass::none);
  EXPECT_EQ(decide_class(std::vector<double>{0.2, 0.6, 0.2}), ConflictClass::slow);
  const double third = 1.0 / 3.0;
  EXPECT_EQ(decide_class(std::vector<double>{third, third, third}), ConflictClass::sudden);
  EXPECT_EQ(decide_class(std::vector<double>{0.4, 0.4, 0.2}), ConflictClass::slow);
  EXPECT_THROW(decide_class(std::vector<double>{0.5, 0.5}), ShapeError);
}

TEST(Reward, ClassRewards) {
  EXPECT_EQ(compute_reward(ConflictClass::none), 100.0);
  EXPECT_EQ(compute_reward(ConflictClass::slow), 50.0);
  RewardConfig shifted;
  shifted.r_prime = 5.0;
  EXPECT_EQ(compute_reward(ConflictClass::sudden, shifted), -95.0);
}

TEST(Reward, AffineInRPrime) {
  for (double rp : {-3.5, 0.0, 0.25, 12.0}) {
    RewardConfig c;
    c.r_prime = rp;
    for (int k = 0; k < 3; ++k) {
      const auto cls = conflict_class_from_index(k);
      EXPECT_EQ(compute_reward(cls, c), rp + compute_reward(cls));
    }
  }
}

TEST(Featurize, ZeroEpochGivesZeroFeatures) {
  eeg::EEGEpoch e;
  e.data = nn::Tensor2D(32, 1200);
  const auto f = featurize(e);
  ASSERT_EQ(f.size(), 96u);
  for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(Featurize, LengthAndGeometry) {
  const auto e = op::synth_eeg_epoch(kEeg, ConflictClass::slow, 3);
  EXPECT_EQ(featurize(e).size(), 96u);
  eeg::EEGEpoch short_epoch;
  short_epoch.data = nn::Tensor2D(32, 1000);
  EXPECT_THROW(featurize(short_epoch), ShapeError);
  eeg::EEGEpoch few;
  few.data = nn::Tensor2D(16, 1200);
  EXPECT_THROW(featurize(few), ShapeError);
}

TEST(Featurize, SuddenHasLargerThetaThanNone) {
  const auto fz = eeg::channel_index(eeg::default_layout(), "Fz");
  double sudden = 0.0, none = 0.0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    sudden += featurize(op::synth_eeg_epoch(kEeg, ConflictClass::sudden, seed))[fz * FeatureSpec::kPerChannel];
    none += featurize(op::synth_eeg_epoch(kEeg, ConflictClass::none, seed))[fz * FeatureSpec::kPerChannel];
  }
  EXPECT_GT(sudden, none);
}

TEST(Train, DeterministicPerSeed) {
  const auto ds = make_synthetic_dataset(kEeg, {20, 5, 0}, 4);
  const auto a = train(ds, 9, quick_config());
  const auto b = train(ds, 9, quick_config());
  EXPECT_EQ(a.model.net, b.model.net);
  EXPECT_EQ(a.model.feature_mean, b.model.feature_mean);
  EXPECT_NE(a.model.net, train(ds, 10, quick_config()).model.net);
}

TEST(Train, RejectsMissingClass) {
  auto ds = make_synthetic_dataset(kEeg, {10, 5, 0}, 4);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] == ConflictClass::slow) ds.labels[i] = ConflictClass::none;
  EXPECT_THROW(train(ds, 1, quick_config()), std::invalid_argument);
}

TEST(Train, ReportsHistory) {
  const auto r = train(make_synthetic_dataset(kEeg, {20, 5, 0}, 4), 2, quick_config());
  ASSERT_FALSE(r.history.empty());
  EXPECT_LE(r.history.size(), 15u);
  EXPECT_GE(r.best_epoch, 1u);
  for (const auto& h : r.history) {
    EXPECT_GE(h.train_accuracy, 0.0);
    EXPECT_LE(h.validation_accuracy, 1.0);
  }
}

TEST(Train, LossNonIncreasingForMostSeeds) {
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = train(make_synthetic_dataset(kEeg, {60, 20, 0}, seed), seed);
    bool ok = true;
    for (std::size_t i = 1; i < r.history.size(); ++i) ok = ok && r.history[i].train_loss <= r.history[i - 1].train_loss;
    monotone += ok;
  }
  EXPECT_GE(monotone, 9);
}

TEST(Classify, ProbabilitiesSumToOne) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto c = classify(trained_model(), op::synth_eeg_epoch(kEeg, conflict_class_from_index(seed % 3), derive_seed(seed, 99)));
    EXPECT_NEAR(c.probabilities[0] + c.probabilities[1] + c.probabilities[2], 1.0, 1e-9);
    EXPECT_EQ(c.conflict, decide_class(c.probabilities));
  }
}

TEST(Classify, HeldOutSuddenEpochsAreConfident) {
  int confident = 0;
  const int n = 50;
  for (int k = 0; k < n; ++k) {
    const auto c = classify(trained_model(), op::synth_eeg_epoch(kEeg, ConflictClass::sudden, derive_seed(777, k)));
    confident += c.conflict == ConflictClass::sudden && c.probabilities[2] > 0.5;
  }
  EXPECT_GE(confident, static_cast<int>(0.8 * n));
}

TEST(Classify, ChannelPermutationWithMatchingModelLeavesOutputs) {
  const auto& model = trained_model();
  std::vector<std::size_t> perm(32);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), Rng(5));

  ClassifierModel moved = model;
  auto& w = moved.net.layers()[0].weights;
  const auto& w0 = model.net.layers()[0].weights;
  for (std::size_t dst = 0; dst < 32; ++dst)
    for (std::size_t k = 0; k < FeatureSpec::kPerChannel; ++k) {
      const std::size_t to = dst * FeatureSpec::kPerChannel + k, from = perm[dst] * FeatureSpec::kPerChannel + k;
      moved.feature_mean[to] = model.feature_mean[from];
      moved.feature_scale[to] = model.feature_scale[from];
      for (std::size_t r = 0; r < w.rows; ++r) w(r, to) = w0(r, from);
    }

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = op::synth_eeg_epoch(kEeg, conflict_class_from_index(seed % 3), derive_seed(seed, 55));
    auto shuffled = e;
    for (std::size_t dst = 0; dst < 32; ++dst) {
      const auto src = e.data.row(perm[dst]);
      std::copy(src.begin(), src.end(), shuffled.data.row(dst).begin());
    }
    const auto a = classify(model, e);
    const auto b = classify(moved, shuffled);
    EXPECT_EQ(a.conflict, b.conflict);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a.probabilities[c], b.probabilities[c], 1e-12);
  }
}

TEST(ModelIo, RoundTrip) {
  std::stringstream ss;
  save_model(trained_model(), ss);
  const auto back = load_model(ss);
  EXPECT_EQ(back.net, trained_model().net);
  EXPECT_EQ(back.feature_mean, trained_model().feature_mean);
  EXPECT_EQ(back.feature_scale, trained_model().feature_scale);
  EXPECT_EQ(back.features, trained_model().features);
  std::stringstream bad("NANN");
  EXPECT_THROW(load_model(bad), FormatError);
}

TEST(DatasetIo, ExportImportRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "neuroadapt-test-dataset";
  std::filesystem::remove_all(dir);
  const auto ds = make_synthetic_dataset(kEeg, {2, 1, 1}, 8);
  export_dataset(ds, dir);
  const auto back = import_dataset(dir);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.splits, ds.splits);
  EXPECT_EQ(back.seeds, ds.seeds);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(back.epochs[i].data, ds.epochs[i].data);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(import_dataset(dir), std::runtime_error);
}

TEST(Dataset, BalancedSplits) {
  const auto ds = make_synthetic_dataset(kEeg, {4, 2, 1}, 8);
  EXPECT_EQ(ds.class_counts(Split::train), (std::array<std::size_t, 3>{4, 4, 4}));
  EXPECT_EQ(ds.class_counts(Split::validation), (std::array<std::size_t, 3>{2, 2, 2}));
  EXPECT_EQ(ds.class_counts(Split::test), (std::array<std::size_t, 3>{1, 1, 1}));
  EXPECT_EQ(parse_split("validation"), Split::validation);
  EXPECT_THROW(parse_split("holdout"), std::invalid_argument);
}

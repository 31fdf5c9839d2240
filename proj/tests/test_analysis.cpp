#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "neuroadapt/analysis.hpp"

using namespace neuroadapt;
using namespace neuroadapt::harness;
namespace fs = std::filesystem;

namespace {

const clf::ClassifierModel& model() {
  static const clf::ClassifierModel m = [] {
    SessionConfig c;
    c.classifier_train_per_class = 40;
    return train_session_classifier(c);
  }();
  return m;
}

// Trials whose conflict class falls sudden -> slow -> none, one block per segment.
SessionResult scripted_session(std::size_t per_segment) {
  SessionResult r;
  r.config.mode = SessionMode::closed;
  r.baseline_band_powers = baseline_band_powers(op::synth_resting_recording(r.config.eeg, 20.0, 3));
  const ConflictClass order[] = {ConflictClass::sudden, ConflictClass::slow, ConflictClass::none};
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < per_segment; ++i) {
      const std::size_t k = s * per_segment + i;
      const auto job = run_eeg_job(r.config.eeg, model(), order[s], derive_seed(11, k), 0.0);
      TrialRecord t;
      t.trial = k;
      t.classifier_class = job.classification.conflict;
      t.reward = clf::compute_reward(t.classifier_class);
      t.windows = 10;
      t.sudden_windows = order[s] == ConflictClass::sudden ? 4 : 0;
      t.actor_cost = -static_cast<double>(k);
      t.critic_cost = 1.0 / static_cast<double>(k + 1);
      r.trials.push_back(t);
      r.trial_band_powers.push_back(job.band_powers);
      for (int j = 0; j < 4; ++j) r.steps.push_back({k, 0.008 * static_cast<double>(4 * k + j), 2.0 + s, 0.1, 1.0, 0.3, 0.4, Mode::approaching});
    }
  return r;
}

}  // namespace

TEST(Helpers, MeanSemMedianMovingAverage) {
  const std::vector<double> xs{1, 2, 3, 4};
  const auto m = mean_sem(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.sem, std::sqrt(5.0 / 3.0 / 4.0), 1e-12);
  EXPECT_EQ(m.n, 4u);
  EXPECT_EQ(mean_sem(std::vector<double>{}).n, 0u);
  EXPECT_EQ(mean_sem(std::vector<double>{7}).sem, 0.0);
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
  EXPECT_EQ(moving_average(xs, 2), (std::vector<double>{1, 1.5, 2.5, 3.5}));
  EXPECT_EQ(moving_average(xs, 10), (std::vector<double>{1, 1.5, 2, 2.5}));
  EXPECT_THROW(moving_average(xs, 0), std::invalid_argument);
}

TEST(Analysis, NineTrialsSplitThreeWays) {
  const auto a = analyze_session(scripted_session(3));
  EXPECT_EQ(a.segment_sizes, (std::array<std::size_t, 3>{3, 3, 3}));
  EXPECT_EQ(a.actions.size(), 9u);
}

TEST(Analysis, FallingConflictLowersFrontalTheta) {
  const auto a = analyze_session(scripted_session(10));
  const double t1 = a.frontal_band(eeg::Band::theta, 0).mean;
  const double t2 = a.frontal_band(eeg::Band::theta, 1).mean;
  const double t3 = a.frontal_band(eeg::Band::theta, 2).mean;
  EXPECT_GT(t1, t2);
  EXPECT_GT(t2, t3);
  EXPECT_EQ(a.sudden_rate, (std::array<double, 3>{0.4, 0.0, 0.0}));
  EXPECT_EQ(a.sudden_trial_fraction, (std::array<double, 3>{1.0, 0.0, 0.0}));
  EXPECT_DOUBLE_EQ(a.force[0].mean, 2.0);
  EXPECT_DOUBLE_EQ(a.force[2].mean, 4.0);
  EXPECT_GT(a.reward[2].mean, a.reward[0].mean);
}

TEST(Analysis, AnovaRowsPresent) {
  const auto a = analyze_session(scripted_session(3), true);
  bool theta = false;
  for (const auto& row : a.anova) {
    EXPECT_EQ(row.anova.df_treatment, 2.0);
    ASSERT_TRUE(row.anova.p.has_value());
    theta = theta || row.measure == "theta_frontal";
  }
  EXPECT_TRUE(theta);
  EXPECT_EQ(a.topography.size(), 32u * eeg::kBandCount * 3u);
}

TEST(Analysis, CostTableHasOneEntryPerTrial) {
  const auto r = scripted_session(4);
  const auto a = analyze_session(r);
  ASSERT_EQ(a.costs.size(), r.trials.size());
  std::vector<double> actor;
  for (const auto& t : r.trials) actor.push_back(*t.actor_cost);
  const auto ma = moving_average(actor, 10);
  for (std::size_t k = 0; k < a.costs.size(); ++k) {
    EXPECT_EQ(a.costs[k].trial, k);
    EXPECT_EQ(a.costs[k].actor, actor[k]);
    EXPECT_EQ(a.costs[k].actor_ma10, ma[k]);
  }
}

TEST(Analysis, RejectsTooFewTrialsOrMissingBandPowers) {
  auto r = scripted_session(1);
  r.trials.pop_back();
  r.trial_band_powers.pop_back();
  EXPECT_THROW(analyze_session(r), std::invalid_argument);
  r = scripted_session(1);
  r.trial_band_powers.pop_back();
  EXPECT_THROW(analyze_session(r), std::invalid_argument);
}

TEST(Analysis, WritesTables) {
  const auto dir = fs::temp_directory_path() / "neuroadapt-test-analysis";
  fs::remove_all(dir);
  write_analysis(analyze_session(scripted_session(3)), dir);
  for (const char* f : {"segments.csv", "frontal_bandpowers.csv", "topography.csv", "anova.csv", "actions.csv", "cost_series.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream is(dir / "segments.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) ++lines;
  EXPECT_EQ(lines, 5u);
  fs::remove_all(dir);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neuroadapt/admittance.hpp"
#include "neuroadapt/operator_sim.hpp"

using namespace neuroadapt;
using namespace neuroadapt::op;

namespace {

OperatorModel model_with_waypoint(std::vector<double> wp, double gain, double max_force) {
  OperatorModel m;
  m.waypoints = {std::move(wp), {0.0, 0.0}};
  m.force_gain = gain;
  m.max_force = max_force;
  return m;
}

double theta_power(const eeg::EEGEpoch& e, std::size_t channel) {
  const auto psd = eeg::welch_psd(e.data.row(channel), e.sample_rate, 400, 0.0, 1024);
  return eeg::integrate_band(psd.frequencies, psd.power.row(0), 4.0, 7.0);
}

// Operator pushes at steady state with no schedule damping and a belief
// matched to it (up to noise); sigma1 then rises by delta, switching in extra
// damping. The window judged is 0.2-0.4 s after the switch.
ConflictClass damping_surprise(double delta, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> vigor(0.6, 1.4);
  std::normal_distribution<double> belief_noise(0.0, 0.1);
  admittance::AdmittanceParams p;
  p.sigma0_bar = 0.25;
  p.sigma1_bar = 0.40;
  const double sigma = 0.40;
  const double dt = 0.008;

  OperatorModel m;
  const double before = p.base_damping + admittance::damping_schedule(sigma, p);
  m.believed_damping = before * (1.0 + belief_noise(rng));
  const std::vector<double> force{m.max_force * vigor(rng), 0.0};
  admittance::MotionState s{{force[0] / before, 0.0}, {0.0, 0.0}};

  p.sigma1_bar = 0.40 + delta;
  std::vector<double> mean_v(2, 0.0);
  const int settle = static_cast<int>(std::lround(0.2 / dt));
  const int window = static_cast<int>(std::lround(0.2 / dt));
  for (int i = 0; i < settle + window; ++i) {
    s = admittance::admittance_step(force, s, p, sigma, dt);
    if (i >= settle)
      for (std::size_t k = 0; k < 2; ++k) mean_v[k] += s.velocity[k] / window;
  }
  return detect_conflict(m, expected_velocity(m, force), mean_v).conflict;
}

}  // namespace

TEST(IntendedForce, AtGoalIsZeroAndAdvances) {
  auto m = model_with_waypoint({0.5, 0.2}, 50.0, 100.0);
  const auto f = intended_force(m, std::vector<double>{0.5, 0.2});
  EXPECT_EQ(f, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(m.active_waypoint, 1u);
}

TEST(IntendedForce, Proportional) {
  auto m = model_with_waypoint({0.1, 0.0}, 50.0, 100.0);
  const auto f = intended_force(m, std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(f[0], 5.0, 1e-12);
  EXPECT_NEAR(f[1], 0.0, 1e-12);
  EXPECT_EQ(m.active_waypoint, 0u);
}

TEST(IntendedForce, NormClamped) {
  auto m = model_with_waypoint({10.0, 0.0}, 50.0, 100.0);
  const auto f = intended_force(m, std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(f[0], 100.0, 1e-9);
  EXPECT_NEAR(f[1], 0.0, 1e-12);
}

TEST(ExpectedVelocity, SteadyStateBelief) {
  OperatorModel m;
  m.believed_damping = 20.0;
  EXPECT_EQ(expected_velocity(m, std::vector<double>{20.0, 0.0}), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(expected_velocity(m, std::vector<double>{0.0, 0.0}), (std::vector<double>{0.0, 0.0}));
}

TEST(ExpectedVelocity, BeliefSmoothing) {
  OperatorModel m;
  m.smoothing = 0.5;
  m.believed_damping = 20.0;
  update_belief(m, 40.0);
  EXPECT_DOUBLE_EQ(m.believed_damping, 30.0);
  update_belief(m, 0.0);
  EXPECT_DOUBLE_EQ(m.believed_damping, 30.0);
}

TEST(DetectConflict, ThresholdClasses) {
  const OperatorModel m;
  const std::vector<double> expected{1.0, 0.0};
  EXPECT_EQ(detect_conflict(m, expected, std::vector<double>{0.95, 0.0}).conflict, ConflictClass::none);
  EXPECT_EQ(detect_conflict(m, expected, std::vector<double>{0.70, 0.0}).conflict, ConflictClass::slow);
  EXPECT_EQ(detect_conflict(m, expected, std::vector<double>{0.20, 0.0}).conflict, ConflictClass::sudden);
  EXPECT_NEAR(detect_conflict(m, expected, std::vector<double>{0.70, 0.0}).deviation, 0.30, 1e-12);
  EXPECT_EQ(classify_deviation(0.15, m), ConflictClass::slow);
  EXPECT_EQ(classify_deviation(0.5, m), ConflictClass::sudden);
}

TEST(DetectConflict, ScaleConsistent) {
  const OperatorModel m;
  Rng rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> k(0.01, 100.0);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> e{n(rng), n(rng)};
    const std::vector<double> a{n(rng), n(rng)};
    if (norm2(e) < 0.1) continue;
    const double s = k(rng);
    const std::vector<double> es{e[0] * s, e[1] * s}, as{a[0] * s, a[1] * s};
    EXPECT_EQ(detect_conflict(m, e, a).conflict, detect_conflict(m, es, as).conflict);
  }
}

TEST(DetectConflict, VelocityFloor) {
  const OperatorModel m;
  const auto e = detect_conflict(m, std::vector<double>{0.0, 0.0}, std::vector<double>{1e-4, 0.0});
  EXPECT_NEAR(e.deviation, 0.1, 1e-12);
}

TEST(DampingSurprise, SuddenRateNonDecreasingInSigma1Jump) {
  const std::vector<double> deltas{0.0, 0.02, 0.05, 0.10, 0.20, 0.30, 0.45};
  double prev = -1.0;
  std::vector<double> rates;
  for (double d : deltas) {
    int sudden = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) sudden += damping_surprise(d, seed) == ConflictClass::sudden;
    const double rate = sudden / 50.0;
    EXPECT_GE(rate, prev) << "delta " << d;
    prev = rate;
    rates.push_back(rate);
  }
  EXPECT_EQ(rates.front(), 0.0);
  EXPECT_GT(rates.back(), 0.3);
}

TEST(OperatorModel, Validation) {
  OperatorModel m;
  m.slow_threshold = 0.6;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = OperatorModel{};
  m.max_force = 0.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  const auto c = Config::parse("[operator]\nforce_gain = 50\nmax_force = 100\n");
  const auto loaded = operator_from_config(c);
  EXPECT_EQ(loaded.force_gain, 50.0);
  EXPECT_EQ(loaded.max_force, 100.0);
}

TEST(SyntheticEEG, ShapeAndDeterminism) {
  const SyntheticEEGConfig cfg;
  const auto a = synth_eeg_epoch(cfg, ConflictClass::sudden, 42);
  EXPECT_EQ(a.channels(), 32u);
  EXPECT_EQ(a.samples(), 1200u);
  EXPECT_EQ(a.sample_rate, 1000.0);
  EXPECT_TRUE(all_finite(a.data.values));
  EXPECT_EQ(a, synth_eeg_epoch(cfg, ConflictClass::sudden, 42));
  EXPECT_NE(a, synth_eeg_epoch(cfg, ConflictClass::sudden, 43));
}

TEST(SyntheticEEG, AmplitudeOrderingEnforced) {
  SyntheticEEGConfig cfg;
  cfg.deflection_amplitude = {0.0, -8.0, -4.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SyntheticEEGConfig{};
  cfg.theta_amplitude = {1.0, 3.0, 6.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SyntheticEEG, FrontalCentralWeightIsOne) {
  const SyntheticEEGConfig cfg;
  const auto fz = eeg::channel_index(eeg::default_layout(), "Fz");
  EXPECT_DOUBLE_EQ(cfg.channel_weights[fz], 1.0);
  for (double w : cfg.channel_weights) {
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
}

TEST(SyntheticEEG, SuddenThetaPowerAtLeastTwiceNone) {
  const SyntheticEEGConfig cfg;
  const auto fz = eeg::channel_index(eeg::default_layout(), "Fz");
  double sudden = 0.0, none = 0.0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    sudden += theta_power(synth_eeg_epoch(cfg, ConflictClass::sudden, seed), fz);
    none += theta_power(synth_eeg_epoch(cfg, ConflictClass::none, seed), fz);
  }
  EXPECT_GE(sudden / none, 2.0);
}

TEST(SyntheticEEG, ZeroMeanPerChannelOverSeeds) {
  const SyntheticEEGConfig cfg;
  for (ConflictClass c : {ConflictClass::none, ConflictClass::slow, ConflictClass::sudden}) {
    std::vector<double> mean(cfg.channels, 0.0);
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      const auto e = synth_eeg_epoch(cfg, c, derive_seed(seed, 5));
      for (std::size_t ch = 0; ch < e.channels(); ++ch) {
        const auto row = e.data.row(ch);
        double s = 0.0;
        for (double v : row) s += v;
        mean[ch] += s / static_cast<double>(row.size()) / 200.0;
      }
    }
    for (std::size_t ch = 0; ch < cfg.channels; ++ch) EXPECT_LT(std::abs(mean[ch]), 2.0) << "channel " << ch;
  }
}

TEST(SyntheticEEG, RestingRecordingHasNoEvokedResponse) {
  const SyntheticEEGConfig cfg;
  const auto r = synth_resting_recording(cfg, 2.0, 9);
  EXPECT_EQ(r.samples(), 2000u);
  EXPECT_EQ(r.channels(), 32u);
  EXPECT_TRUE(all_finite(r.data.values));
}

#pragma once

// Simulated co-worker: pushes the end effector toward waypoints, predicts the
// robot's response from a believed damping, flags expectation violations as
// conflict events and emits synthetic 32-channel EEG for each event.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroadapt/channel_layout.hpp"
#include "neuroadapt/common.hpp"
#include "neuroadapt/config.hpp"
#include "neuroadapt/eeg_pipeline.hpp"

namespace neuroadapt::op {

struct OperatorModel {
  std::vector<std::vector<double>> waypoints;
  std::size_t active_waypoint = 0;
  double force_gain = 60.0;        ///< N/m
  double max_force = 7.0;          ///< N
  double believed_damping = 15.0;  ///< N s/m
  double smoothing = 0.1;          ///< weight of each new observation in the belief
  double slow_threshold = 0.15;
  double sudden_threshold = 0.5;
  double arrival_tolerance = 0.02;  ///< m
  double velocity_floor = 1e-3;     ///< m/s

  void validate() const {
    if (!(0.0 < slow_threshold && slow_threshold < sudden_threshold))
      throw std::invalid_argument("operator thresholds must satisfy 0 < slow < sudden");
    if (!(max_force > 0.0)) throw std::invalid_argument("max_force must be positive");
    if (!(smoothing > 0.0 && smoothing < 1.0)) throw std::invalid_argument("smoothing must be in (0, 1)");
    if (!(believed_damping > 0.0)) throw std::invalid_argument("believed damping must be positive");
  }
};

inline OperatorModel operator_from_config(const Config& cfg, OperatorModel m = {}) {
  m.force_gain = cfg.get_double("operator.force_gain", m.force_gain);
  m.max_force = cfg.get_double("operator.max_force", m.max_force);
  m.believed_damping = cfg.get_double("operator.believed_damping", m.believed_damping);
  m.smoothing = cfg.get_double("operator.smoothing", m.smoothing);
  m.slow_threshold = cfg.get_double("operator.slow_threshold", m.slow_threshold);
  m.sudden_threshold = cfg.get_double("operator.sudden_threshold", m.sudden_threshold);
  m.validate();
  return m;
}

/// Proportional push toward the active waypoint, norm-clamped to max_force.
/// On arrival (within arrival_tolerance) returns zero force and activates the
/// next waypoint cyclically.
inline std::vector<double> intended_force(OperatorModel& model, std::span<const double> ee_position) {
  if (model.waypoints.empty()) throw std::invalid_argument("intended_force: no waypoints");
  const auto& wp = model.waypoints[model.active_waypoint];
  if (wp.size() != ee_position.size()) throw ShapeError("waypoint and position dimensions differ");
  std::vector<double> f(wp.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = wp[i] - ee_position[i];
  const double dist = norm2(f);
  if (dist < model.arrival_tolerance) {
    model.active_waypoint = (model.active_waypoint + 1) % model.waypoints.size();
    std::fill(f.begin(), f.end(), 0.0);
    return f;
  }
  for (double& v : f) v *= model.force_gain;
  const double mag = norm2(f);
  if (mag > model.max_force)
    for (double& v : f) v *= model.max_force / mag;
  return f;
}

/// Steady-state velocity the operator anticipates for `applied_force`.
inline std::vector<double> expected_velocity(const OperatorModel& model, std::span<const double> applied_force) {
  if (!(model.believed_damping > 0.0)) throw std::invalid_argument("believed damping must be positive");
  std::vector<double> v(applied_force.begin(), applied_force.end());
  for (double& x : v) x /= model.believed_damping;
  return v;
}

/// Exponential smoothing of the believed damping toward an observed F/v ratio.
inline void update_belief(OperatorModel& model, double observed_ratio) {
  if (!std::isfinite(observed_ratio) || observed_ratio <= 0.0) return;
  model.believed_damping = (1.0 - model.smoothing) * model.believed_damping + model.smoothing * observed_ratio;
}

/// |F| / |v| over a window, or 0 when the velocity is below the floor.
inline double observed_damping_ratio(const OperatorModel& model, std::span<const double> force,
                                     std::span<const double> velocity) {
  const double v = norm2(velocity);
  if (v < model.velocity_floor) return 0.0;
  return norm2(force) / v;
}

struct ConflictEvent {
  double time = 0.0;
  ConflictClass conflict = ConflictClass::none;
  double deviation = 0.0;
};

inline ConflictClass classify_deviation(double deviation, const OperatorModel& model) {
  if (deviation >= model.sudden_threshold) return ConflictClass::sudden;
  if (deviation >= model.slow_threshold) return ConflictClass::slow;
  return ConflictClass::none;
}

/// Relative velocity mismatch over a window of averaged velocities.
inline ConflictEvent detect_conflict(const OperatorModel& model, std::span<const double> v_expected,
                                     std::span<const double> v_actual, double time = 0.0) {
  if (v_expected.size() != v_actual.size()) throw ShapeError("velocity dimensions differ");
  std::vector<double> diff(v_actual.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = v_actual[i] - v_expected[i];
  ConflictEvent e;
  e.time = time;
  e.deviation = norm2(diff) / std::max(norm2(v_expected), model.velocity_floor);
  e.conflict = classify_deviation(e.deviation, model);
  return e;
}

// ------------------------------------------------------------ synthetic EEG

struct SyntheticEEGConfig {
  std::size_t channels = eeg::kChannels;
  double sample_rate = 1000.0;
  double epoch_duration = 1.2;  ///< s
  double pink_rms = 10.0;       ///< µV
  std::size_t pink_octaves = 12;
  /// Indexed by ConflictClass (none, slow, sudden).
  std::array<double, kConflictClassCount> deflection_amplitude{0.0, -4.0, -8.0};
  double deflection_latency = 0.25;  ///< s after the event
  double deflection_width = 0.05;    ///< s, Gaussian sigma
  std::array<double, kConflictClassCount> theta_amplitude{0.0, 3.0, 6.0};
  double theta_frequency = 5.0;  ///< Hz
  double burst_onset = 0.0;      ///< s after the event
  double burst_duration = 0.4;   ///< s
  std::vector<double> channel_weights = eeg::channel_weights(eeg::default_layout());

  void validate() const {
    if (channel_weights.size() != channels) throw std::invalid_argument("one weight per channel required");
    const auto& d = deflection_amplitude;
    if (!(std::abs(d[2]) > std::abs(d[1]) && std::abs(d[1]) > 0.0 && d[0] == 0.0))
      throw std::invalid_argument("deflection amplitudes must satisfy |sudden| > |slow| > none = 0");
    const auto& t = theta_amplitude;
    if (!(t[2] > t[1] && t[1] > 0.0 && t[0] == 0.0))
      throw std::invalid_argument("theta amplitudes must satisfy sudden > slow > none = 0");
  }

  std::size_t epoch_samples() const { return static_cast<std::size_t>(std::llround(epoch_duration * sample_rate)); }
};

/// Voss-McCartney pink noise: `octaves` held random rows, row k refreshed
/// every 2^k samples, plus a white row; scaled to `rms` (µV).
inline void fill_pink_noise(std::span<double> out, std::size_t octaves, double rms, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> rows(octaves);
  double sum = 0.0;
  for (double& r : rows) {
    r = u(rng);
    sum += r;
  }
  const double scale = rms / std::sqrt(static_cast<double>(octaves + 1) / 3.0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    if (n > 0) {
      const auto k = static_cast<std::size_t>(std::countr_zero(static_cast<unsigned long long>(n)));
      if (k < octaves) {
        sum -= rows[k];
        rows[k] = u(rng);
        sum += rows[k];
      }
    }
    out[n] = (sum + u(rng)) * scale;
  }
}

/// Class-dependent evoked waveform at unit channel weight, µV.
inline double evoked_waveform(const SyntheticEEGConfig& cfg, ConflictClass c, double t) {
  const auto idx = static_cast<std::size_t>(c);
  const double z = (t - cfg.deflection_latency) / cfg.deflection_width;
  double v = cfg.deflection_amplitude[idx] * std::exp(-0.5 * z * z);
  const double tb = t - cfg.burst_onset;
  // inverted sine so the burst trough lines up with the negative deflection
  if (tb >= 0.0 && tb < cfg.burst_duration)
    v -= cfg.theta_amplitude[idx] * std::sin(2.0 * std::numbers::pi * cfg.theta_frequency * tb);
  return v;
}

/// One event-locked epoch (event at t = 0): per-channel pink noise plus the
/// weighted evoked waveform of class `c`. Deterministic per seed.
inline eeg::EEGEpoch synth_eeg_epoch(const SyntheticEEGConfig& cfg, ConflictClass c, std::uint64_t seed) {
  if (static_cast<std::size_t>(c) >= kConflictClassCount) throw std::invalid_argument("unknown conflict class");
  cfg.validate();
  eeg::EEGEpoch e;
  e.sample_rate = cfg.sample_rate;
  e.event_tag = std::string(to_string(c));
  e.data = nn::Tensor2D(cfg.channels, cfg.epoch_samples());
  Rng rng(seed);
  std::vector<double> wave(e.samples());
  for (std::size_t s = 0; s < wave.size(); ++s) wave[s] = evoked_waveform(cfg, c, static_cast<double>(s) / cfg.sample_rate);
  for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
    auto row = e.data.row(ch);
    fill_pink_noise(row, cfg.pink_octaves, cfg.pink_rms, rng);
    const double w = cfg.channel_weights[ch];
    for (std::size_t s = 0; s < row.size(); ++s) row[s] += w * wave[s];
  }
  return e;
}

/// Eyes-open resting recording: background noise only.
inline eeg::EEGEpoch synth_resting_recording(const SyntheticEEGConfig& cfg, double duration, std::uint64_t seed) {
  eeg::EEGEpoch e;
  e.sample_rate = cfg.sample_rate;
  e.event_tag = "baseline";
  e.data = nn::Tensor2D(cfg.channels, static_cast<std::size_t>(std::llround(duration * cfg.sample_rate)));
  Rng rng(seed);
  for (std::size_t ch = 0; ch < cfg.channels; ++ch) fill_pink_noise(e.data.row(ch), cfg.pink_octaves, cfg.pink_rms, rng);
  return e;
}

}  // namespace neuroadapt::op

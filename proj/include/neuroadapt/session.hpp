#pragma once

// Open- and closed-loop session runner: operator -> admittance -> arm ->
// conflict -> synthetic EEG -> classifier -> reward -> agent, at 125 Hz.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuroadapt/admittance.hpp"
#include "neuroadapt/ccddpg.hpp"
#include "neuroadapt/common.hpp"
#include "neuroadapt/config.hpp"
#include "neuroadapt/conflict_classifier.hpp"
#include "neuroadapt/eeg_io.hpp"
#include "neuroadapt/eeg_pipeline.hpp"
#include "neuroadapt/manipulator.hpp"
#include "neuroadapt/operator_sim.hpp"

namespace neuroadapt::harness {

// ------------------------------------------------------------------ events

enum class EventKind : std::uint8_t {
  marker_sigma_q,
  marker_half,
  marker_quarter,
  marker_eighth,
  conflict,
  action,
  reward,
};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::marker_sigma_q: return "marker_sigma_q";
    case EventKind::marker_half: return "marker_half";
    case EventKind::marker_quarter: return "marker_quarter";
    case EventKind::marker_eighth: return "marker_eighth";
    case EventKind::conflict: return "conflict";
    case EventKind::action: return "action";
    case EventKind::reward: return "reward";
  }
  return "?";
}

inline EventKind parse_event_kind(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(EventKind::reward); ++i)
    if (to_string(static_cast<EventKind>(i)) == s) return static_cast<EventKind>(i);
  throw std::invalid_argument("unknown event kind '" + std::string(s) + "'");
}

struct EventRecord {
  double time = 0.0;
  EventKind kind = EventKind::conflict;
  std::size_t trial = 0;
  std::string payload;  ///< space-separated key=value pairs
};

/// Uniform delay in [low, high] seconds.
class LatencySampler {
 public:
  LatencySampler(double low, double high, std::uint64_t seed) : low_(low), high_(high), rng_(seed) {
    if (!(low >= 0.0 && low <= high && high <= 1.0)) throw std::invalid_argument("latency range must satisfy 0 <= low <= high <= 1");
  }
  double operator()() {
    if (low_ == high_) return low_;
    return std::uniform_real_distribution<double>(low_, high_)(rng_);
  }
  double low() const { return low_; }
  double high() const { return high_; }

 private:
  double low_, high_;
  Rng rng_;
};

struct DeliveredEvent {
  EventRecord event;
  double emitted = 0.0;
  double delivered = 0.0;
  double latency() const { return delivered - emitted; }
};

/// Delays events by a sampled latency while keeping per-stream FIFO order.
class EventBus {
 public:
  explicit EventBus(LatencySampler sampler) : sampler_(std::move(sampler)) {}

  DeliveredEvent dispatch(EventRecord e, const std::string& stream = "default") {
    DeliveredEvent d;
    d.emitted = e.time;
    d.delivered = e.time + sampler_();
    auto it = last_.find(stream);
    if (it != last_.end()) d.delivered = std::max(d.delivered, it->second);
    last_[stream] = d.delivered;
    e.time = d.delivered;
    d.event = std::move(e);
    return d;
  }

 private:
  LatencySampler sampler_;
  std::map<std::string, double> last_;
};

// ----------------------------------------------------------------- markers

/// Downward-crossing detector for the four sigma thresholds:
/// sigma_q, (s1 - s0)/2, (s1 - s0)/4, (s1 - s0)/8.
class SigmaMarkerEmitter {
 public:
  SigmaMarkerEmitter(double sigma0, double sigma1, double sigma_q) { set_thresholds(sigma0, sigma1, sigma_q); }

  void set_thresholds(double sigma0, double sigma1, double sigma_q) {
    if (!(sigma0 < sigma1)) throw std::invalid_argument("marker thresholds need sigma0 < sigma1");
    const double w = sigma1 - sigma0;
    thresholds_ = {sigma_q, w / 2.0, w / 4.0, w / 8.0};
  }

  const std::array<double, 4>& thresholds() const { return thresholds_; }

  std::vector<EventRecord> update(double time, double sigma_min, std::size_t trial = 0) {
    std::vector<EventRecord> out;
    if (!primed_) {
      for (std::size_t k = 0; k < 4; ++k) armed_[k] = sigma_min >= thresholds_[k];
      primed_ = true;
      return out;
    }
    for (std::size_t k = 0; k < 4; ++k) {
      if (armed_[k] && sigma_min < thresholds_[k]) {
        armed_[k] = false;
        char buf[96];
        std::snprintf(buf, sizeof buf, "threshold=%.17g sigma_min=%.17g", thresholds_[k], sigma_min);
        out.push_back({time, static_cast<EventKind>(k), trial, buf});
      } else if (!armed_[k] && sigma_min > thresholds_[k]) {
        armed_[k] = true;
      }
    }
    return out;
  }

 private:
  std::array<double, 4> thresholds_{};
  std::array<bool, 4> armed_{};
  bool primed_ = false;
};

/// Marker events for a sampled sigma_min series.
inline std::vector<EventRecord> emit_sigma_markers(std::span<const double> times, std::span<const double> sigma_min,
                                                   double sigma0, double sigma1, double sigma_q) {
  if (times.size() != sigma_min.size()) throw ShapeError("emit_sigma_markers: times and values differ in length");
  SigmaMarkerEmitter em(sigma0, sigma1, sigma_q);
  std::vector<EventRecord> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    auto ev = em.update(times[i], sigma_min[i]);
    out.insert(out.end(), ev.begin(), ev.end());
  }
  return out;
}

// ------------------------------------------------------------------ config

enum class SessionMode : std::uint8_t { open = 0, closed = 1 };

inline std::string_view to_string(SessionMode m) { return m == SessionMode::open ? "open" : "closed"; }

inline SessionMode parse_session_mode(std::string_view s) {
  if (s == "open") return SessionMode::open;
  if (s == "closed") return SessionMode::closed;
  throw std::invalid_argument("mode must be 'open' or 'closed', got '" + std::string(s) + "'");
}

/// Two transitions per trial and a noisy class reward: wider, slower-decaying
/// exploration and a smaller batch (updates start after 8 trials, not 16) learn
/// more reliably in 100 trials than the generic agent defaults.
inline rl::AgentConfig session_agent_defaults() {
  rl::AgentConfig a;
  a.noise_std = 0.05;
  a.noise_decay = 0.98;
  a.batch_size = 16;
  return a;
}

struct SessionConfig {
  SessionMode mode = SessionMode::closed;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  double dt = 0.008;  ///< s, 125 Hz robot stream
  double latency_min = 0.2;
  double latency_max = 0.3;
  std::filesystem::path out_dir = "out";

  arm::ArmModel arm = arm::default_arm();
  std::vector<double> q_start{0.3, 1.9, 0.6};
  std::vector<double> q_approach{0.1, 0.18, 0.25};  ///< pose defining the near-singular waypoint
  double waypoint_radius_jitter = 0.015;             ///< m, inward only
  double waypoint_angle_jitter = 0.08;               ///< rad
  double force_spread = 0.4;                         ///< per-trial push strength, relative
  double dls_lambda = 0.02;
  double phase_timeout = 8.0;  ///< s

  admittance::AdmittanceParams admittance;
  op::OperatorModel operator_model;
  double conflict_window = 0.2;  ///< s
  double engaged_force = 1.0;    ///< N; windows below this mean force are not judged
  double engaged_speed = 0.05;   ///< m/s; nor windows where the operator expects almost no motion
  /// Pull of the operator's prediction toward the observed velocity at each
  /// window start (0 = open-loop internal model, 1 = fresh prediction each window).
  double perceptual_correction = 0.5;
  op::SyntheticEEGConfig eeg;
  double baseline_duration = 60.0;  ///< s

  rl::AgentConfig agent = session_agent_defaults();
  std::size_t updates_per_trial = 10;
  clf::RewardConfig reward;
  std::optional<double> sigma_q;         ///< marker threshold; defaults to the active sigma1
  std::optional<double> fixed_sigma1;    ///< closed-loop machinery with a frozen policy
  std::optional<double> fixed_sigma1_leaving;  ///< leaving-mode value under a frozen policy; defaults to fixed_sigma1
  std::uint64_t classifier_seed = 1;
  std::size_t classifier_train_per_class = 200;
  bool pipelined = false;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(latency_min >= 0.0 && latency_min <= latency_max && latency_max <= 1.0))
      throw std::invalid_argument("latency range must lie within [0, 1] s with min <= max");
    if (q_start.size() != arm.joint_count() || q_approach.size() != arm.joint_count())
      throw ShapeError("start/approach poses must have one angle per joint");
    if (!(perceptual_correction >= 0.0 && perceptual_correction <= 1.0))
      throw std::invalid_argument("perceptual correction must lie in [0, 1]");
    if (!(force_spread >= 0.0 && force_spread < 1.0)) throw std::invalid_argument("force spread must lie in [0, 1)");
    if (!(conflict_window >= dt)) throw std::invalid_argument("conflict window shorter than one step");
    if (fixed_sigma1 && !(*fixed_sigma1 >= admittance.bounds_approaching.low && *fixed_sigma1 <= admittance.bounds_approaching.high))
      throw std::invalid_argument("fixed sigma1 must lie within the approaching bounds");
    arm.validate();
    admittance.validate();
    operator_model.validate();
    eeg.validate();
    agent.validate();
  }
};

/// Reads session.*, agent.*, reward.*, classifier.*, eeg.* plus the
/// admittance/operator/arm keys of the module loaders.
inline SessionConfig session_config_from(const Config& c, SessionConfig s = {}) {
  if (c.has("session.mode")) s.mode = parse_session_mode(c.get_string("session.mode", "closed"));
  s.trials = static_cast<std::size_t>(c.get_int("session.trials", static_cast<long long>(s.trials)));
  s.seed = static_cast<std::uint64_t>(c.get_int("session.seed", static_cast<long long>(s.seed)));
  s.dt = c.get_double("session.dt", s.dt);
  s.latency_min = c.get_double("session.latency_min", s.latency_min);
  s.latency_max = c.get_double("session.latency_max", s.latency_max);
  if (c.has("session.out")) s.out_dir = c.get_string("session.out", "");
  s.conflict_window = c.get_double("session.conflict_window", s.conflict_window);
  s.force_spread = c.get_double("session.force_spread", s.force_spread);
  s.perceptual_correction = c.get_double("session.perceptual_correction", s.perceptual_correction);
  s.engaged_force = c.get_double("session.engaged_force", s.engaged_force);
  s.engaged_speed = c.get_double("session.engaged_speed", s.engaged_speed);
  s.phase_timeout = c.get_double("session.phase_timeout", s.phase_timeout);
  s.updates_per_trial = static_cast<std::size_t>(c.get_int("session.updates_per_trial", static_cast<long long>(s.updates_per_trial)));
  s.pipelined = c.get_bool("session.pipelined", s.pipelined);
  if (c.has("session.sigma_q")) s.sigma_q = c.get_double("session.sigma_q");
  if (c.has("session.fixed_sigma1")) s.fixed_sigma1 = c.get_double("session.fixed_sigma1");
  if (c.has("session.fixed_sigma1_leaving")) s.fixed_sigma1_leaving = c.get_double("session.fixed_sigma1_leaving");
  s.baseline_duration = c.get_double("session.baseline_duration", s.baseline_duration);
  s.arm = arm::arm_from_config(c, s.arm);
  s.admittance = admittance::params_from_config(c, s.admittance);
  s.operator_model = op::operator_from_config(c, s.operator_model);
  s.eeg.pink_rms = c.get_double("eeg.pink_rms", s.eeg.pink_rms);
  s.agent.gamma = c.get_double("agent.gamma", s.agent.gamma);
  s.agent.tau = c.get_double("agent.tau", s.agent.tau);
  s.agent.actor_lr = c.get_double("agent.actor_lr", s.agent.actor_lr);
  s.agent.critic_lr = c.get_double("agent.critic_lr", s.agent.critic_lr);
  s.agent.batch_size = static_cast<std::size_t>(c.get_int("agent.batch_size", static_cast<long long>(s.agent.batch_size)));
  s.agent.buffer_capacity = static_cast<std::size_t>(c.get_int("agent.buffer_capacity", static_cast<long long>(s.agent.buffer_capacity)));
  s.agent.noise_std = c.get_double("agent.noise_std", s.agent.noise_std);
  s.agent.noise_decay = c.get_double("agent.noise_decay", s.agent.noise_decay);
  s.agent.reward_scale = c.get_double("agent.reward_scale", s.agent.reward_scale);
  s.agent.actor_output_init = c.get_double("agent.actor_output_init", s.agent.actor_output_init);
  s.agent.critic_output_init = c.get_double("agent.critic_output_init", s.agent.critic_output_init);
  s.agent.critic_weight_decay = c.get_double("agent.critic_weight_decay", s.agent.critic_weight_decay);
  s.reward.r_prime = c.get_double("reward.r_prime", s.reward.r_prime);
  s.classifier_seed = static_cast<std::uint64_t>(c.get_int("classifier.seed", static_cast<long long>(s.classifier_seed)));
  s.classifier_train_per_class =
      static_cast<std::size_t>(c.get_int("classifier.train_per_class", static_cast<long long>(s.classifier_train_per_class)));
  s.validate();
  return s;
}

// ---------------------------------------------------------------- records

struct StepRow {
  std::size_t trial = 0;
  double t = 0.0;
  double force = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double sigma_min = 0.0;
  double sigma1 = 0.0;
  Mode mode = Mode::leaving;
};

struct TrialRecord {
  std::size_t trial = 0;
  double start = 0.0;
  double end = 0.0;
  double sigma0_approach = 0.0;
  double sigma0_leave = 0.0;
  double sigma1_approach = 0.0;
  double sigma1_leave = 0.0;
  double action_time = 0.0;  ///< when the approach sigma1 was decided
  double switch_time = 0.0;  ///< approach -> retreat
  double anchor_sigma = 0.0;
  double epoch_start = 0.0;
  double epoch_end = 0.0;
  double reward_time = 0.0;
  double latency = 0.0;
  ConflictClass operator_class = ConflictClass::none;
  ConflictClass classifier_class = ConflictClass::none;
  std::array<double, 3> probabilities{};
  double reward = 0.0;
  std::size_t windows = 0;
  std::size_t slow_windows = 0;
  std::size_t sudden_windows = 0;
  std::optional<double> actor_cost;
  std::optional<double> critic_cost;
  /// Delay between the epoch this trial's action was decided from and the
  /// decision itself (closed loop, trials after the first).
  std::optional<double> decision_delay;
};

struct SessionResult {
  SessionConfig config;
  std::vector<TrialRecord> trials;
  std::vector<EventRecord> events;
  std::vector<StepRow> steps;
  std::vector<eeg::BandPowers> trial_band_powers;
  eeg::BandPowers baseline_band_powers;
};

// ------------------------------------------------------------------ helpers

/// Offline path of one event-locked epoch: 250 Hz, zero-phase 2-50 Hz,
/// 0-400 ms (100 samples) zero-padded to 256, Welch band powers.
inline constexpr std::size_t kAnalysisSamples = 100;
inline constexpr std::size_t kAnalysisNfft = 256;

inline eeg::EEGEpoch offline_preprocess(const eeg::EEGEpoch& raw) {
  return eeg::bandpass_2_50(eeg::resample_1000_250(raw), true);
}

inline eeg::BandPowers offline_band_powers(const eeg::EEGEpoch& raw) {
  const auto e = offline_preprocess(raw);
  const auto cut = eeg::extract_epoch(e, 0.0, static_cast<double>(kAnalysisSamples) / e.sample_rate, raw.event_tag);
  return eeg::band_powers(eeg::welch_psd(cut, kAnalysisSamples, 0.0, kAnalysisNfft));
}

/// Baseline for the offline path: same segment length and FFT size, 50% overlap.
inline eeg::BandPowers baseline_band_powers(const eeg::EEGEpoch& resting) {
  const auto e = offline_preprocess(resting);
  return eeg::band_powers(eeg::welch_psd(e, kAnalysisSamples, 0.5, kAnalysisNfft));
}

inline clf::ClassifierModel train_session_classifier(const SessionConfig& cfg) {
  const auto n = cfg.classifier_train_per_class;
  auto ds = clf::make_synthetic_dataset(cfg.eeg, {n, std::max<std::size_t>(n / 4, 1), 0}, cfg.classifier_seed);
  return clf::train(ds, cfg.classifier_seed).model;
}

struct EEGJobResult {
  clf::Classification classification;
  eeg::BandPowers band_powers;
};

inline EEGJobResult run_eeg_job(const op::SyntheticEEGConfig& cfg, const clf::ClassifierModel& model, ConflictClass c,
                                std::uint64_t seed, double event_time) {
  auto epoch = op::synth_eeg_epoch(cfg, c, seed);
  epoch.event_time = event_time;
  return {clf::classify(model, epoch), offline_band_powers(epoch)};
}

/// Running means of the robot features over a phase.
struct PhaseStats {
  double position = 0.0, velocity = 0.0, force = 0.0, sigma = 0.0;
  std::size_t n = 0;

  void add(double p, double v, double f, double s) {
    position += p;
    velocity += v;
    force += f;
    sigma += s;
    ++n;
  }

  rl::RobotStateVector state(double sigma1, Mode mode) const {
    rl::RobotStateVector r;
    const double k = n ? 1.0 / static_cast<double>(n) : 0.0;
    r.position_magnitude = position * k;
    r.velocity_magnitude = velocity * k;
    r.force_magnitude = force * k;
    r.sigma_min = std::max(0.0, sigma * k);
    r.current_sigma1 = sigma1;
    r.mode = mode;
    return r;
  }
};

inline std::vector<double> rotate(std::span<const double> p, double angle, double radius_scale) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<double> out(p.begin(), p.end());
  out[0] = radius_scale * (c * p[0] - s * p[1]);
  out[1] = radius_scale * (s * p[0] + c * p[1]);
  return out;
}

inline std::string fmt(double v) { return eeg::format_double(v); }

// ----------------------------------------------------------------- runner

/// Runs a full session in memory. `classifier` may be shared between
/// sessions; when null one is trained from the config.
inline SessionResult simulate_session(const SessionConfig& cfg, const clf::ClassifierModel* classifier = nullptr) {
  cfg.validate();
  std::unique_ptr<clf::ClassifierModel> own;
  if (!classifier) {
    own = std::make_unique<clf::ClassifierModel>(train_session_classifier(cfg));
    classifier = own.get();
  }
  SessionResult res;
  res.config = cfg;

  const auto resting = op::synth_resting_recording(cfg.eeg, cfg.baseline_duration, derive_seed(cfg.seed, 7));
  res.baseline_band_powers = baseline_band_powers(resting);

  const bool closed = cfg.mode == SessionMode::closed;
  const bool learning = closed && !cfg.fixed_sigma1;
  std::optional<rl::Agent> agent;
  if (learning) agent.emplace(cfg.agent, derive_seed(cfg.seed, 11), cfg.admittance);
  Rng open_rng(derive_seed(cfg.seed, 13));
  Rng jitter_rng(derive_seed(cfg.seed, 17));
  EventBus bus(LatencySampler(cfg.latency_min, cfg.latency_max, derive_seed(cfg.seed, 19)));

  const auto& model = cfg.arm;
  std::vector<double> q = cfg.q_start;
  const auto retreat_base = arm::task_position(model, cfg.q_start);
  const auto approach_base = arm::task_position(model, cfg.q_approach);
  auto motion = admittance::MotionState::rest(model.task_dims);
  arm::SingularityTracker tracker;
  op::OperatorModel op = cfg.operator_model;
  const double M = cfg.admittance.virtual_mass;
  std::vector<double> felt_force(model.task_dims, 0.0);  // force equivalent of the operator's predicted velocity
  std::vector<double> last_v(model.task_dims, 0.0), win_v0(model.task_dims, 0.0);
  bool reanchor = true;

  const auto window_steps = static_cast<std::size_t>(std::llround(cfg.conflict_window / cfg.dt));
  std::uint64_t step = 0;
  auto now = [&] { return static_cast<double>(step) * cfg.dt; };

  const auto& ab = cfg.admittance.bounds_approaching;
  const auto& lb = cfg.admittance.bounds_leaving;
  double sigma1_app = cfg.admittance.sigma1_bar, sigma1_leave = cfg.admittance.sigma1_bar;
  double pending_action_time = 0.0;
  std::optional<double> pending_delay;
  rl::RobotStateVector pending_state;
  {
    const auto r0 = arm::singularity_measure(model, q);
    PhaseStats init;
    init.add(norm2(retreat_base), 0.0, 0.0, r0.sigma_min);
    pending_state = init.state(sigma1_app, Mode::approaching);
    if (learning) sigma1_app = agent->act(pending_state);
    if (cfg.fixed_sigma1) {
      sigma1_app = *cfg.fixed_sigma1;
      sigma1_leave = admittance::clamp_sigma1(cfg.fixed_sigma1_leaving.value_or(*cfg.fixed_sigma1), Mode::leaving, cfg.admittance);
    }
  }
  SigmaMarkerEmitter markers(admittance::kClosedLoopSigma0, sigma1_app, cfg.sigma_q.value_or(sigma1_app));

  for (std::size_t k = 0; k < cfg.trials; ++k) {
    TrialRecord tr;
    tr.trial = k;
    tr.start = now();
    std::vector<EventRecord> trial_events;

    // per-trial operator goals
    const double ang = std::uniform_real_distribution<double>(-cfg.waypoint_angle_jitter, cfg.waypoint_angle_jitter)(jitter_rng);
    const double rad = 1.0 - std::uniform_real_distribution<double>(0.0, cfg.waypoint_radius_jitter)(jitter_rng) / norm2(approach_base);
    op.waypoints = {rotate(approach_base, ang, rad), retreat_base};
    op.max_force = cfg.operator_model.max_force *
                   std::uniform_real_distribution<double>(1.0 - cfg.force_spread, 1.0 + cfg.force_spread)(jitter_rng);
    op.active_waypoint = 0;
    reanchor = true;

    double s0_app = admittance::kClosedLoopSigma0, s0_leave = admittance::kClosedLoopSigma0;
    if (!closed) {
      std::uniform_real_distribution<double> ua(ab.low, ab.high), ul(lb.low, lb.high);
      double a1 = ua(open_rng), a2 = ua(open_rng), l1 = ul(open_rng), l2 = ul(open_rng);
      s0_app = std::min(a1, a2);
      sigma1_app = std::max(a1, a2);
      s0_leave = std::min(l1, l2);
      sigma1_leave = std::max(l1, l2);
      pending_action_time = tr.start;
    }
    if (learning) sigma1_leave = admittance::clamp_sigma1(sigma1_leave, Mode::leaving, cfg.admittance);
    tr.sigma0_approach = s0_app;
    tr.sigma0_leave = s0_leave;
    tr.sigma1_approach = sigma1_app;
    tr.action_time = pending_action_time;
    tr.decision_delay = pending_delay;
    const rl::RobotStateVector s_start = pending_state;
    {
      char buf[128];
      std::snprintf(buf, sizeof buf, "phase=approach sigma0=%.17g sigma1=%.17g", s0_app, sigma1_app);
      trial_events.push_back({pending_action_time, EventKind::action, k, buf});
    }
    markers.set_thresholds(s0_app, std::max(sigma1_app, s0_app + 1e-9), cfg.sigma_q.value_or(sigma1_app));

    enum class Phase { approach, retreat, hold } phase = Phase::approach;
    PhaseStats approach_stats, retreat_stats;
    double anchor_time = tr.start, anchor_sigma = std::numeric_limits<double>::infinity();
    rl::RobotStateVector s_switch, s_end;
    std::optional<double> epoch_end;
    std::optional<DeliveredEvent> delivery;
    bool decided = false;
    std::future<EEGJobResult> job_future;
    std::optional<EEGJobResult> job_result;
    ConflictClass worst = ConflictClass::none;

    std::vector<double> win_force(model.task_dims, 0.0), win_felt(model.task_dims, 0.0), win_vel(model.task_dims, 0.0);
    std::size_t win_n = 0;

    while (true) {
      const double t = now();
      const auto ee = arm::task_position(model, q);
      const auto reading = tracker.update(arm::singularity_measure(model, q).sigma_min);
      const double sigma = reading.sigma_min;

      std::vector<double> force(model.task_dims, 0.0);
      if (phase != Phase::hold) {
        const auto before = op.active_waypoint;
        force = op::intended_force(op, ee);
        if (op.active_waypoint != before || t - tr.start > cfg.phase_timeout * (phase == Phase::approach ? 1.0 : 2.0)) {
          if (op.active_waypoint == before) op.active_waypoint = (op.active_waypoint + 1) % op.waypoints.size();
          std::fill(force.begin(), force.end(), 0.0);
          if (phase == Phase::approach) {
            phase = Phase::retreat;
            reanchor = true;
            tr.switch_time = t;
            s_switch = approach_stats.state(sigma1_app, Mode::leaving);
            if (learning) sigma1_leave = agent->act(s_switch);
            char buf[128];
            std::snprintf(buf, sizeof buf, "phase=leave sigma0=%.17g sigma1=%.17g", s0_leave, sigma1_leave);
            trial_events.push_back({t, EventKind::action, k, buf});
          } else {
            phase = Phase::hold;
          }
        }
      }

      auto params = cfg.admittance;
      const bool approaching = reading.mode == Mode::approaching;
      params.sigma0_bar = approaching ? s0_app : s0_leave;
      params.sigma1_bar = std::max(params.sigma0_bar, approaching ? sigma1_app : sigma1_leave);
      motion = admittance::admittance_step(force, motion, params, sigma, cfg.dt);
      q = arm::joint_step(model, q, motion.velocity, cfg.dt, cfg.dls_lambda);
      const auto ee_next = arm::task_position(model, q);
      std::vector<double> v_actual(model.task_dims);
      for (std::size_t i = 0; i < v_actual.size(); ++i) v_actual[i] = (ee_next[i] - ee[i]) / cfg.dt;

      const double fmag = norm2(force), vmag = norm2(v_actual), amag = norm2(motion.acceleration);
      res.steps.push_back({k, t, fmag, vmag, amag, sigma, params.sigma1_bar, reading.mode});
      for (auto& ev : markers.update(t, sigma, k)) trial_events.push_back(std::move(ev));

      if (phase == Phase::approach) {
        approach_stats.add(norm2(ee), vmag, fmag, sigma);
        if (sigma < anchor_sigma) {
          anchor_sigma = sigma;
          anchor_time = t;
        }
      } else if (!decided) {
        retreat_stats.add(norm2(ee), vmag, fmag, sigma);
      }

      // operator forward model, re-anchored on the observed velocity at
      // each window start: v_exp integrates M dv/dt = F - B_believed v
      if (win_n == 0) {
        win_v0 = last_v;
        const double kappa = reanchor ? 1.0 : cfg.perceptual_correction;
        for (std::size_t i = 0; i < felt_force.size(); ++i)
          felt_force[i] += kappa * (op.believed_damping * last_v[i] - felt_force[i]);
        reanchor = false;
      }
      const double alpha = std::min(1.0, cfg.dt * op.believed_damping / M);
      for (std::size_t i = 0; i < felt_force.size(); ++i) felt_force[i] += alpha * (force[i] - felt_force[i]);
      for (std::size_t i = 0; i < model.task_dims; ++i) {
        win_force[i] += force[i];
        win_felt[i] += felt_force[i];
        win_vel[i] += v_actual[i];
      }
      last_v = v_actual;
      if (++win_n == window_steps) {
        const double n = static_cast<double>(win_n);
        std::vector<double> inertial(model.task_dims);
        for (std::size_t i = 0; i < model.task_dims; ++i) {
          win_force[i] /= n;
          win_felt[i] /= n;
          win_vel[i] /= n;
          inertial[i] = win_force[i] - M * (last_v[i] - win_v0[i]) / (n * cfg.dt);
        }
        const auto v_exp = op::expected_velocity(op, win_felt);
        if (norm2(win_force) >= cfg.engaged_force && norm2(v_exp) >= cfg.engaged_speed) {
          const auto ev = op::detect_conflict(op, v_exp, win_vel, t);
          ++tr.windows;
          if (ev.conflict == ConflictClass::slow) ++tr.slow_windows;
          if (ev.conflict == ConflictClass::sudden) ++tr.sudden_windows;
          if (!epoch_end) worst = std::max(worst, ev.conflict);
          char buf[96];
          std::snprintf(buf, sizeof buf, "class=%s deviation=%.17g", std::string(to_string(ev.conflict)).c_str(), ev.deviation);
          trial_events.push_back({t, EventKind::conflict, k, buf});
          op::update_belief(op, op::observed_damping_ratio(op, inertial, win_vel));
        }
        std::fill(win_force.begin(), win_force.end(), 0.0);
        std::fill(win_felt.begin(), win_felt.end(), 0.0);
        std::fill(win_vel.begin(), win_vel.end(), 0.0);
        win_n = 0;
      }

      ++step;
      const double t_next = now();

      if (!epoch_end && phase != Phase::approach && t_next >= anchor_time + cfg.eeg.epoch_duration) {
        epoch_end = anchor_time + cfg.eeg.epoch_duration;
        tr.epoch_start = anchor_time;
        tr.epoch_end = *epoch_end;
        tr.anchor_sigma = anchor_sigma;
        tr.operator_class = worst;
        const auto eeg_seed = derive_seed(cfg.seed, 1'000'000 + k);
        if (cfg.pipelined)
          job_future = std::async(std::launch::async, run_eeg_job, std::cref(cfg.eeg), std::cref(*classifier), worst, eeg_seed,
                                  anchor_time);
        else
          job_result = run_eeg_job(cfg.eeg, *classifier, worst, eeg_seed, anchor_time);
        delivery = bus.dispatch({*epoch_end, EventKind::reward, k, {}}, "classifier");
        tr.reward_time = delivery->delivered;
        tr.latency = delivery->latency();
      }
      if (delivery && !decided && t_next >= delivery->delivered) {
        decided = true;
        s_end = retreat_stats.state(sigma1_leave, Mode::approaching);
      }
      if (phase == Phase::hold && decided) break;
    }

    if (cfg.pipelined) job_result = job_future.get();
    const auto& jr = *job_result;
    tr.classifier_class = jr.classification.conflict;
    tr.probabilities = jr.classification.probabilities;
    tr.reward = clf::compute_reward(tr.classifier_class, cfg.reward);
    res.trial_band_powers.push_back(jr.band_powers);
    {
      char buf[160];
      std::snprintf(buf, sizeof buf, "reward=%.17g class=%s operator_class=%s", tr.reward,
                    std::string(to_string(tr.classifier_class)).c_str(), std::string(to_string(tr.operator_class)).c_str());
      trial_events.push_back({tr.reward_time, EventKind::reward, k, buf});
    }
    tr.sigma1_leave = sigma1_leave;

    pending_state = s_end;
    pending_delay.reset();
    if (learning) {
      agent->observe(s_start, tr.sigma1_approach, tr.reward, s_switch, false);
      agent->observe(s_switch, sigma1_leave, tr.reward, s_end, true);
      double actor_sum = 0.0, critic_sum = 0.0;
      std::size_t n = 0;
      if (agent->buffer().ready(cfg.agent.batch_size)) {
        for (std::size_t u = 0; u < cfg.updates_per_trial; ++u) {
          const auto c = agent->train_step(cfg.agent.batch_size);
          if (!c) continue;
          actor_sum += c->actor;
          critic_sum += c->critic;
          ++n;
        }
      } else if (const auto c = agent->evaluate_costs()) {
        // warm-up: no update yet, costs still reported for every trial
        actor_sum = c->actor;
        critic_sum = c->critic;
        n = 1;
      }
      if (n) {
        tr.actor_cost = actor_sum / static_cast<double>(n);
        tr.critic_cost = critic_sum / static_cast<double>(n);
      }
      agent->end_trial();
      sigma1_app = agent->act(pending_state);
      pending_action_time = tr.reward_time;
      pending_delay = tr.reward_time - tr.epoch_end;
    }
    tr.end = now();
    std::stable_sort(trial_events.begin(), trial_events.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.time < b.time; });
    res.events.insert(res.events.end(), trial_events.begin(), trial_events.end());
    res.trials.push_back(tr);
  }
  return res;
}

}  // namespace neuroadapt::harness

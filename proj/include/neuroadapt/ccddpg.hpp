#pragma once

// Conflict-reward DDPG: deterministic actor over sigma1_bar, Q critic, replay
// buffer and soft-tracked target networks.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuroadapt/admittance.hpp"
#include "neuroadapt/binary_io.hpp"
#include "neuroadapt/common.hpp"
#include "neuroadapt/neuralnet.hpp"

namespace neuroadapt::rl {

using nn::DenseNet;
using nn::NetGradients;
using nn::OptimizerState;

struct RobotStateVector {
  double position_magnitude = 0.0;  ///< m
  double velocity_magnitude = 0.0;  ///< m/s
  double force_magnitude = 0.0;     ///< N
  double sigma_min = 0.0;
  double current_sigma1 = admittance::AdmittanceParams{}.sigma1_bar;
  Mode mode = Mode::approaching;

  void validate() const {
    const std::array<double, 5> v{position_magnitude, velocity_magnitude, force_magnitude, sigma_min, current_sigma1};
    if (!all_finite(v)) throw std::invalid_argument("robot state has non-finite entries");
    if (sigma_min < 0.0) throw std::invalid_argument("robot state sigma_min must be >= 0");
  }
  bool operator==(const RobotStateVector&) const = default;
};

inline constexpr std::size_t kStateDim = 6;

/// Full-scale values mapping each magnitude from [0, scale] onto [-1, 1].
struct StateScales {
  double position = 1.5;
  double velocity = 1.0;
  double force = 30.0;
  double sigma = 0.6;
};

/// Sigma1 range shared by both modes; the critic sees actions mapped from it onto [-1, 1].
inline constexpr admittance::SigmaBounds kActionSpan{0.25, 0.45};

inline std::array<double, kStateDim> normalize(const RobotStateVector& s, const StateScales& k = {}) {
  s.validate();
  auto unit = [](double x, double scale) { return std::clamp(2.0 * x / scale - 1.0, -1.0, 1.0); };
  return {unit(s.position_magnitude, k.position),
          unit(s.velocity_magnitude, k.velocity),
          unit(s.force_magnitude, k.force),
          unit(s.sigma_min, k.sigma),
          std::clamp((s.current_sigma1 - kActionSpan.midpoint()) / kActionSpan.halfwidth(), -1.0, 1.0),
          s.mode == Mode::approaching ? 1.0 : -1.0};
}

inline double normalize_action(double a) { return (a - kActionSpan.midpoint()) / kActionSpan.halfwidth(); }

struct Transition {
  RobotStateVector s;
  double a = 0.0;
  double r = 0.0;  ///< already scaled for storage
  RobotStateVector s_next;
  bool terminal = false;
  bool operator==(const Transition&) const = default;
};

struct AgentConfig {
  double gamma = 0.9;
  double tau = 0.01;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 5000;
  double noise_std = 0.03;
  double noise_decay = 0.97;  ///< per trial
  std::vector<std::size_t> hidden{64, 64};
  double reward_scale = 0.01;  ///< applied before storage
  /// Final-layer weights start in U(-x, x); 0 keeps Glorot.
  double actor_output_init = 3e-3;
  double critic_output_init = 3e-3;
  double critic_weight_decay = 0.0;
  StateScales scales;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
    if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (batch_size == 0 || buffer_capacity == 0) throw std::invalid_argument("batch size and capacity must be positive");
    if (!(noise_std >= 0.0 && noise_decay > 0.0 && noise_decay <= 1.0)) throw std::invalid_argument("bad exploration noise");
    if (!(reward_scale > 0.0)) throw std::invalid_argument("reward scale must be positive");
    if (!(actor_output_init >= 0.0 && critic_output_init >= 0.0))
      throw std::invalid_argument("output init must be non-negative");
    if (!(critic_weight_decay >= 0.0)) throw std::invalid_argument("critic weight decay must be non-negative");
    for (auto h : hidden)
      if (h == 0) throw std::invalid_argument("hidden widths must be positive");
  }
};

// ------------------------------------------------------------------ policy

/// Raw actor output; throws DivergenceError when it is not finite.
inline double actor_output(const DenseNet& actor, const RobotStateVector& s, const StateScales& k = {}) {
  const auto x = normalize(s, k);
  const double o = nn::forward(actor, x).at(0);
  if (!std::isfinite(o)) throw DivergenceError("actor output is not finite");
  return o;
}

/// Deterministic policy pi(s) = midpoint + halfwidth * tanh(o).
inline double policy_from_output(double o, Mode mode, const admittance::AdmittanceParams& p = {}) {
  const auto& b = p.bounds(mode);
  return b.midpoint() + b.halfwidth() * std::tanh(o);
}

inline double policy_action(const DenseNet& actor, const RobotStateVector& s, const StateScales& k = {},
                            const admittance::AdmittanceParams& p = {}) {
  return policy_from_output(actor_output(actor, s, k), s.mode, p);
}

/// Exploratory action: pi(s) plus N(0, noise_std), clamped into the mode's range.
inline double select_action(const DenseNet& actor, const RobotStateVector& s, double noise_std, std::uint64_t seed,
                            const StateScales& k = {}, const admittance::AdmittanceParams& p = {}) {
  const double o = actor_output(actor, s, k);
  double a = policy_from_output(o, s.mode, p);
  if (noise_std > 0.0) {
    Rng rng(seed);
    a += std::normal_distribution<double>(0.0, noise_std)(rng);
  }
  return admittance::clamp_sigma1(a, s.mode, p);
}

// ------------------------------------------------------------------ critic

inline std::vector<double> critic_input(const RobotStateVector& s, double a, const StateScales& k = {}) {
  const auto x = normalize(s, k);
  std::vector<double> in(x.begin(), x.end());
  in.push_back(normalize_action(a));
  return in;
}

inline double q_value(const DenseNet& critic, const RobotStateVector& s, double a, const StateScales& k = {}) {
  return nn::forward(critic, critic_input(s, a, k)).at(0);
}

/// y_i = r_i + gamma * Q'(s'_i, pi'(s'_i)), or r_i for terminal transitions.
inline std::vector<double> td_target(std::span<const Transition> batch, const DenseNet& critic_target,
                                     const DenseNet& actor_target, double gamma, const StateScales& k = {},
                                     const admittance::AdmittanceParams& p = {}) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto& t : batch) {
    if (t.terminal || gamma == 0.0) {
      y.push_back(t.r);
      continue;
    }
    const double a_next = policy_action(actor_target, t.s_next, k, p);
    y.push_back(t.r + gamma * q_value(critic_target, t.s_next, a_next, k));
  }
  return y;
}

struct LossAndGradients {
  double value = 0.0;
  NetGradients grads;
};

/// L = (1/N) sum (y_i - Q(s_i, a_i))^2 and dL/dtheta.
inline LossAndGradients critic_loss(const DenseNet& critic, std::span<const Transition> batch, std::span<const double> y,
                                    const StateScales& k = {}) {
  if (batch.empty() || batch.size() != y.size()) throw ShapeError("critic_loss: batch and targets must be equal, non-empty");
  const double n = static_cast<double>(batch.size());
  LossAndGradients out{0.0, NetGradients::zeros_like(critic)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto trace = nn::forward_trace(critic, critic_input(batch[i].s, batch[i].a, k));
    const double err = y[i] - trace.output()[0];
    out.value += err * err / n;
    const std::array<double, 1> up{-2.0 * err / n};
    out.grads.add(nn::backward(critic, trace, up).params);
  }
  return out;
}

/// One Adam step on the critic; returns the loss before the step. A positive
/// `weight_decay` adds an L2 pull on the weights (not biases) to the gradient only.
inline double critic_update(DenseNet& critic, OptimizerState& opt, std::span<const Transition> batch,
                            std::span<const double> y, const StateScales& k = {}, double weight_decay = 0.0) {
  auto lg = critic_loss(critic, batch, y, k);
  if (weight_decay > 0.0) {
    const auto& layers = critic.layers();
    for (std::size_t li = 0; li < layers.size(); ++li)
      for (std::size_t j = 0; j < layers[li].weights.values.size(); ++j)
        lg.grads.weights[li].values[j] += weight_decay * layers[li].weights.values[j];
  }
  nn::opt_step(critic, lg.grads, opt);
  return lg.value;
}

/// J = -(1/N) sum Q(s_i, pi(s_i)) and dJ/dw through the critic's action input:
/// dJ/dw = -(1/N) sum dQ/da * da/do * do/dw.
inline LossAndGradients actor_cost(const DenseNet& actor, const DenseNet& critic, std::span<const Transition> batch,
                                   const StateScales& k = {}, const admittance::AdmittanceParams& p = {}) {
  if (batch.empty()) throw ShapeError("actor_cost: empty batch");
  const double n = static_cast<double>(batch.size());
  LossAndGradients out{0.0, NetGradients::zeros_like(actor)};
  for (const auto& t : batch) {
    const auto x = normalize(t.s, k);
    const auto atrace = nn::forward_trace(actor, x);
    const double o = atrace.output()[0];
    const double a = policy_from_output(o, t.s.mode, p);
    const auto ctrace = nn::forward_trace(critic, critic_input(t.s, a, k));
    out.value -= ctrace.output()[0] / n;
    const std::array<double, 1> one{1.0};
    const auto dq_din = nn::backward(critic, ctrace, one).input;
    const double dq_da = dq_din.back() / kActionSpan.halfwidth();
    const double th = std::tanh(o);
    const double da_do = p.bounds(t.s.mode).halfwidth() * (1.0 - th * th);
    const std::array<double, 1> up{-dq_da * da_do / n};
    out.grads.add(nn::backward(actor, atrace, up).params);
  }
  return out;
}

/// One Adam step on the actor with the critic held fixed; returns the cost before the step.
inline double actor_update(DenseNet& actor, OptimizerState& opt, const DenseNet& critic, std::span<const Transition> batch,
                           const StateScales& k = {}, const admittance::AdmittanceParams& p = {}) {
  auto lg = actor_cost(actor, critic, batch, k, p);
  nn::opt_step(actor, lg.grads, opt);
  return lg.value;
}

/// theta_target <- tau * theta_online + (1 - tau) * theta_target
inline void soft_update(DenseNet& target, const DenseNet& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  if (target.input_dim() != online.input_dim() || target.layers().size() != online.layers().size())
    throw ShapeError("soft_update: network shapes differ");
  for (std::size_t li = 0; li < online.layers().size(); ++li) {
    auto& t = target.layers()[li];
    const auto& o = online.layers()[li];
    if (t.weights.rows != o.weights.rows || t.weights.cols != o.weights.cols || t.activation != o.activation)
      throw ShapeError("soft_update: layer shapes differ");
    for (std::size_t k = 0; k < t.weights.values.size(); ++k)
      t.weights.values[k] = tau * o.weights.values[k] + (1.0 - tau) * t.weights.values[k];
    for (std::size_t k = 0; k < t.biases.size(); ++k) t.biases[k] = tau * o.biases[k] + (1.0 - tau) * t.biases[k];
  }
}

/// Euclidean distance between two same-shaped parameter sets.
inline double parameter_distance(const DenseNet& a, const DenseNet& b) {
  std::vector<double> pa, pb;
  a.for_each_parameter([&](double v) { pa.push_back(v); });
  b.for_each_parameter([&](double v) { pb.push_back(v); });
  if (pa.size() != pb.size()) throw ShapeError("parameter_distance: shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return std::sqrt(s);
}

// ------------------------------------------------------------------ replay

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000, std::uint64_t seed = 0) : capacity_(capacity), seed_(seed), rng_(seed) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  }

  void push(const Transition& t) {
    if (!std::isfinite(t.r)) throw std::invalid_argument("transition reward must be finite");
    if (storage_.size() == capacity_) storage_.pop_front();
    storage_.push_back(t);
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t seed() const { return seed_; }
  const Transition& operator[](std::size_t i) const { return storage_[i]; }
  bool ready(std::size_t batch_size) const { return batch_size > 0 && storage_.size() >= batch_size; }

  /// Distinct uniform indices (partial Fisher-Yates); nullopt when not ready.
  std::optional<std::vector<std::size_t>> sample_indices(std::size_t batch_size) {
    if (!ready(batch_size)) return std::nullopt;
    std::vector<std::size_t> idx(storage_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng_)]);
    }
    idx.resize(batch_size);
    return idx;
  }

  std::optional<std::vector<Transition>> sample(std::size_t batch_size) {
    auto idx = sample_indices(batch_size);
    if (!idx) return std::nullopt;
    std::vector<Transition> batch;
    batch.reserve(idx->size());
    for (auto i : *idx) batch.push_back(storage_[i]);
    return batch;
  }

  void save(std::ostream& os) const;
  static ReplayBuffer load(std::istream& is);

 private:
  std::size_t capacity_;
  std::uint64_t seed_;
  Rng rng_;
  std::deque<Transition> storage_;
};

/// Inserts `t` (when given) and samples a batch; nullopt signals "not ready".
inline std::optional<std::vector<Transition>> store_and_sample(ReplayBuffer& buffer, const std::optional<Transition>& t,
                                                               std::size_t batch_size) {
  if (t) buffer.push(*t);
  return buffer.sample(batch_size);
}

namespace detail {

inline void write_state(std::ostream& os, const RobotStateVector& s) {
  for (double v : {s.position_magnitude, s.velocity_magnitude, s.force_magnitude, s.sigma_min, s.current_sigma1})
    io::write_f64(os, v);
  io::write_u32(os, static_cast<std::uint32_t>(s.mode));
}

inline RobotStateVector read_state(std::istream& is) {
  RobotStateVector s;
  s.position_magnitude = io::read_f64(is);
  s.velocity_magnitude = io::read_f64(is);
  s.force_magnitude = io::read_f64(is);
  s.sigma_min = io::read_f64(is);
  s.current_sigma1 = io::read_f64(is);
  const auto m = io::read_u32(is);
  if (m > 1) throw FormatError("bad mode flag in replay record");
  s.mode = static_cast<Mode>(m);
  return s;
}

}  // namespace detail

// "NARB" magic, u32 version, u64 capacity, u64 seed, sampler state (text
// form of the engine), u64 count, then the transitions.
inline void ReplayBuffer::save(std::ostream& os) const {
  io::write_magic(os, "NARB");
  io::write_u32(os, 1);
  io::write_u64(os, capacity_);
  io::write_u64(os, seed_);
  std::ostringstream rs;
  rs << rng_;
  io::write_string(os, rs.str());
  io::write_u64(os, storage_.size());
  for (const auto& t : storage_) {
    detail::write_state(os, t.s);
    io::write_f64(os, t.a);
    io::write_f64(os, t.r);
    detail::write_state(os, t.s_next);
    io::write_u32(os, t.terminal ? 1 : 0);
  }
}

inline ReplayBuffer ReplayBuffer::load(std::istream& is) {
  io::expect_magic(is, "NARB");
  if (io::read_u32(is) != 1) throw FormatError("unsupported replay format version");
  const auto capacity = io::read_u64(is);
  const auto seed = io::read_u64(is);
  if (capacity == 0 || capacity > (1u << 26)) throw FormatError("implausible replay capacity");
  ReplayBuffer b(capacity, seed);
  std::istringstream rs(io::read_string(is));
  rs >> b.rng_;
  if (!rs) throw FormatError("corrupt replay sampler state");
  const auto n = io::read_u64(is);
  if (n > capacity) throw FormatError("replay record count exceeds capacity");
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.s = detail::read_state(is);
    t.a = io::read_f64(is);
    t.r = io::read_f64(is);
    t.s_next = detail::read_state(is);
    t.terminal = io::read_u32(is) != 0;
    b.storage_.push_back(t);
  }
  return b;
}

// ------------------------------------------------------------------ agent

struct UpdateCosts {
  double actor = 0.0;
  double critic = 0.0;
};

class Agent {
 public:
  Agent() = default;

  Agent(AgentConfig cfg, std::uint64_t seed, admittance::AdmittanceParams bounds = {})
      : cfg_(std::move(cfg)), bounds_(bounds), seed_(seed), buffer_(cfg_.buffer_capacity, derive_seed(seed, 3)) {
    cfg_.validate();
    std::vector<nn::LayerSpec> layers;
    for (auto h : cfg_.hidden) layers.push_back({h, nn::Activation::relu});
    layers.push_back({1, nn::Activation::linear});
    actor_ = DenseNet::create(kStateDim, layers, derive_seed(seed, 1));
    critic_ = DenseNet::create(kStateDim + 1, layers, derive_seed(seed, 2));
    // small actor output starts the policy at the range midpoint
    for (auto [net, x] : {std::pair{&actor_, cfg_.actor_output_init}, std::pair{&critic_, cfg_.critic_output_init}}) {
      if (x <= 0.0) continue;
      auto& last = net->layers().back();
      const double limit = std::sqrt(6.0 / static_cast<double>(last.weights.cols + last.weights.rows));
      for (double& w : last.weights.values) w *= x / limit;
    }
    actor_target_ = actor_;
    critic_target_ = critic_;
    actor_opt_ = OptimizerState::for_net(actor_, cfg_.actor_lr);
    critic_opt_ = OptimizerState::for_net(critic_, cfg_.critic_lr);
    noise_std_ = cfg_.noise_std;
  }

  const AgentConfig& config() const { return cfg_; }
  const DenseNet& actor() const { return actor_; }
  const DenseNet& critic() const { return critic_; }
  const DenseNet& actor_target() const { return actor_target_; }
  const DenseNet& critic_target() const { return critic_target_; }
  DenseNet& actor() { return actor_; }
  DenseNet& critic() { return critic_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  double noise_std() const { return noise_std_; }
  std::uint64_t actions_taken() const { return action_count_; }
  std::uint64_t updates() const { return update_count_; }

  /// Exploratory action; each call draws fresh noise from a counter-derived seed.
  double act(const RobotStateVector& s) {
    return select_action(actor_, s, noise_std_, derive_seed(seed_, 1000 + action_count_++), cfg_.scales, bounds_);
  }

  double greedy(const RobotStateVector& s) const { return policy_action(actor_, s, cfg_.scales, bounds_); }

  /// Stores a transition with the reward converted to storage scale.
  void observe(const RobotStateVector& s, double a, double reward, const RobotStateVector& s_next, bool terminal) {
    buffer_.push({s, admittance::clamp_sigma1(a, s.mode, bounds_), reward * cfg_.reward_scale, s_next, terminal});
  }

  /// Critic step, actor step, target tracking. nullopt when the buffer is not ready.
  std::optional<UpdateCosts> train_step(std::size_t batch_size) {
    auto batch = buffer_.sample(batch_size);
    if (!batch) return std::nullopt;
    const auto y = td_target(*batch, critic_target_, actor_target_, cfg_.gamma, cfg_.scales, bounds_);
    UpdateCosts c;
    c.critic = critic_update(critic_, critic_opt_, *batch, y, cfg_.scales, cfg_.critic_weight_decay);
    c.actor = actor_update(actor_, actor_opt_, critic_, *batch, cfg_.scales, bounds_);
    soft_update(critic_target_, critic_, cfg_.tau);
    soft_update(actor_target_, actor_, cfg_.tau);
    ++update_count_;
    return c;
  }

  std::optional<UpdateCosts> train_step() { return train_step(cfg_.batch_size); }

  /// Critic loss and actor cost over the whole buffer, no parameter change and
  /// no sampling. nullopt on an empty buffer.
  std::optional<UpdateCosts> evaluate_costs() const {
    if (buffer_.size() == 0) return std::nullopt;
    std::vector<Transition> all;
    all.reserve(buffer_.size());
    for (std::size_t i = 0; i < buffer_.size(); ++i) all.push_back(buffer_[i]);
    const auto y = td_target(all, critic_target_, actor_target_, cfg_.gamma, cfg_.scales, bounds_);
    return UpdateCosts{actor_cost(actor_, critic_, all, cfg_.scales, bounds_).value,
                       critic_loss(critic_, all, y, cfg_.scales).value};
  }

  void end_trial() { noise_std_ *= cfg_.noise_decay; }

  void save_checkpoint(const std::filesystem::path& dir) const;
  static Agent load_checkpoint(const std::filesystem::path& dir);

 private:
  AgentConfig cfg_;
  admittance::AdmittanceParams bounds_;
  std::uint64_t seed_ = 0;
  DenseNet actor_, critic_, actor_target_, critic_target_;
  OptimizerState actor_opt_, critic_opt_;
  ReplayBuffer buffer_{1};
  double noise_std_ = 0.0;
  std::uint64_t action_count_ = 0;
  std::uint64_t update_count_ = 0;
};

namespace detail {

template <class F>
void write_file(const std::filesystem::path& p, F&& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  body(os);
}

template <class F>
auto read_file(const std::filesystem::path& p, F&& body) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + p.string() + "'");
  return body(is);
}

}  // namespace detail

// Checkpoint directory: manifest.json plus one NANN file per network, one NAOP
// file per optimizer and the replay buffer (NARB).
inline void Agent::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "actor.nann", [&](std::ostream& os) { nn::save(actor_, os); });
  detail::write_file(dir / "critic.nann", [&](std::ostream& os) { nn::save(critic_, os); });
  detail::write_file(dir / "actor_target.nann", [&](std::ostream& os) { nn::save(actor_target_, os); });
  detail::write_file(dir / "critic_target.nann", [&](std::ostream& os) { nn::save(critic_target_, os); });
  detail::write_file(dir / "actor_opt.naop", [&](std::ostream& os) { nn::save_optimizer(actor_opt_, os); });
  detail::write_file(dir / "critic_opt.naop", [&](std::ostream& os) { nn::save_optimizer(critic_opt_, os); });
  detail::write_file(dir / "replay.narb", [&](std::ostream& os) { buffer_.save(os); });
  const auto hex = [](double v) {
    std::ostringstream s;
    s << std::hexfloat << v;
    return s.str();
  };
  nlohmann::json m{
      {"format", "neuroadapt-ccddpg-checkpoint"},
      {"version", 1},
      {"seed", seed_},
      {"actions_taken", action_count_},
      {"updates", update_count_},
      {"noise_std", hex(noise_std_)},
      {"config",
       {{"gamma", hex(cfg_.gamma)},
        {"tau", hex(cfg_.tau)},
        {"actor_lr", hex(cfg_.actor_lr)},
        {"critic_lr", hex(cfg_.critic_lr)},
        {"batch_size", cfg_.batch_size},
        {"buffer_capacity", cfg_.buffer_capacity},
        {"noise_std", hex(cfg_.noise_std)},
        {"noise_decay", hex(cfg_.noise_decay)},
        {"hidden", cfg_.hidden},
        {"reward_scale", hex(cfg_.reward_scale)},
        {"actor_output_init", hex(cfg_.actor_output_init)},
        {"critic_output_init", hex(cfg_.critic_output_init)},
        {"critic_weight_decay", hex(cfg_.critic_weight_decay)},
        {"scales", {hex(cfg_.scales.position), hex(cfg_.scales.velocity), hex(cfg_.scales.force), hex(cfg_.scales.sigma)}}}},
      {"bounds",
       {hex(bounds_.bounds_approaching.low), hex(bounds_.bounds_approaching.high), hex(bounds_.bounds_leaving.low),
        hex(bounds_.bounds_leaving.high)}},
      {"files",
       {{"actor", "actor.nann"},
        {"critic", "critic.nann"},
        {"actor_target", "actor_target.nann"},
        {"critic_target", "critic_target.nann"},
        {"actor_optimizer", "actor_opt.naop"},
        {"critic_optimizer", "critic_opt.naop"},
        {"replay", "replay.narb"}}}};
  detail::write_file(dir / "manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

inline Agent Agent::load_checkpoint(const std::filesystem::path& dir) {
  const auto m = detail::read_file(dir / "manifest.json", [](std::istream& is) { return nlohmann::json::parse(is); });
  if (m.at("format") != "neuroadapt-ccddpg-checkpoint" || m.at("version") != 1)
    throw FormatError("not a version-1 agent checkpoint");
  const auto num = [](const nlohmann::json& j) { return std::strtod(j.get<std::string>().c_str(), nullptr); };
  Agent a;
  const auto& c = m.at("config");
  a.cfg_.gamma = num(c.at("gamma"));
  a.cfg_.tau = num(c.at("tau"));
  a.cfg_.actor_lr = num(c.at("actor_lr"));
  a.cfg_.critic_lr = num(c.at("critic_lr"));
  a.cfg_.batch_size = c.at("batch_size").get<std::size_t>();
  a.cfg_.buffer_capacity = c.at("buffer_capacity").get<std::size_t>();
  a.cfg_.noise_std = num(c.at("noise_std"));
  a.cfg_.noise_decay = num(c.at("noise_decay"));
  a.cfg_.hidden = c.at("hidden").get<std::vector<std::size_t>>();
  a.cfg_.reward_scale = num(c.at("reward_scale"));
  a.cfg_.actor_output_init = num(c.at("actor_output_init"));
  a.cfg_.critic_output_init = num(c.at("critic_output_init"));
  a.cfg_.critic_weight_decay = num(c.at("critic_weight_decay"));
  const auto& sc = c.at("scales");
  a.cfg_.scales = {num(sc.at(0)), num(sc.at(1)), num(sc.at(2)), num(sc.at(3))};
  a.cfg_.validate();
  const auto& b = m.at("bounds");
  a.bounds_.bounds_approaching = {num(b.at(0)), num(b.at(1))};
  a.bounds_.bounds_leaving = {num(b.at(2)), num(b.at(3))};
  a.seed_ = m.at("seed").get<std::uint64_t>();
  a.action_count_ = m.at("actions_taken").get<std::uint64_t>();
  a.update_count_ = m.at("updates").get<std::uint64_t>();
  a.noise_std_ = num(m.at("noise_std"));
  const auto& f = m.at("files");
  const auto path = [&](const char* key) { return dir / f.at(key).get<std::string>(); };
  a.actor_ = detail::read_file(path("actor"), [](std::istream& is) { return nn::load(is); });
  a.critic_ = detail::read_file(path("critic"), [](std::istream& is) { return nn::load(is); });
  a.actor_target_ = detail::read_file(path("actor_target"), [](std::istream& is) { return nn::load(is); });
  a.critic_target_ = detail::read_file(path("critic_target"), [](std::istream& is) { return nn::load(is); });
  a.actor_opt_ = detail::read_file(path("actor_optimizer"), [](std::istream& is) { return nn::load_optimizer(is); });
  a.critic_opt_ = detail::read_file(path("critic_optimizer"), [](std::istream& is) { return nn::load_optimizer(is); });
  a.buffer_ = detail::read_file(path("replay"), [](std::istream& is) { return ReplayBuffer::load(is); });
  if (a.actor_.input_dim() != kStateDim || a.critic_.input_dim() != kStateDim + 1)
    throw FormatError("checkpoint networks have unexpected input widths");
  return a;
}

}  // namespace neuroadapt::rl

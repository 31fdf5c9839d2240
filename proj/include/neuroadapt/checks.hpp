#pragma once

// The twelve end-to-end acceptance checks, shared by `neuroadapt check` and
// the acceptance binary. Each returns a pass flag plus a one-line detail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "neuroadapt/admittance.hpp"
#include "neuroadapt/analysis.hpp"
#include "neuroadapt/ccddpg.hpp"
#include "neuroadapt/conflict_classifier.hpp"
#include "neuroadapt/eeg_pipeline.hpp"
#include "neuroadapt/manipulator.hpp"
#include "neuroadapt/neuralnet.hpp"
#include "neuroadapt/session.hpp"
#include "neuroadapt/session_io.hpp"
#include "neuroadapt/stats.hpp"

namespace neuroadapt::checks {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------ fixtures

/// Net of a single linear layer with zero weights: outputs `bias` for any input.
inline nn::DenseNet constant_net(std::size_t input_dim, double bias) {
  nn::DenseLayer l;
  l.weights = nn::Tensor2D(1, input_dim);
  l.biases = {bias};
  l.activation = nn::Activation::linear;
  return nn::DenseNet(input_dim, {l});
}

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
/// for a scalar function of a net's parameters.
inline double parameter_gradient_error(const nn::DenseNet& net, const std::function<double(const nn::DenseNet&)>& f,
                                       const nn::NetGradients& analytic, double h = 1e-5) {
  std::vector<double> flat;
  analytic.for_each([&](double g) { flat.push_back(g); });
  nn::DenseNet probe = net;
  std::vector<double*> params;
  probe.for_each_parameter([&](double& p) { params.push_back(&p); });
  if (params.size() != flat.size()) throw ShapeError("gradient and parameter counts differ");
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + h;
    const double lp = f(probe);
    *params[k] = saved - h;
    const double lm = f(probe);
    *params[k] = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    worst = std::max(worst, std::abs(flat[k] - numeric) / std::max({std::abs(flat[k]), std::abs(numeric), 1e-8}));
  }
  return worst;
}

inline rl::RobotStateVector random_state(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  rl::RobotStateVector s;
  s.position_magnitude = 0.2 + 1.1 * u(rng);
  s.velocity_magnitude = 0.8 * u(rng);
  s.force_magnitude = 25.0 * u(rng);
  s.sigma_min = 0.05 + 0.5 * u(rng);
  s.mode = u(rng) < 0.5 ? Mode::approaching : Mode::leaving;
  s.current_sigma1 = s.mode == Mode::approaching ? 0.35 + 0.1 * u(rng) : 0.25 + 0.2 * u(rng);
  return s;
}

inline std::vector<rl::Transition> random_batch(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<rl::Transition> b;
  for (std::size_t i = 0; i < n; ++i) {
    rl::Transition t;
    t.s = random_state(rng);
    t.s_next = random_state(rng);
    const auto& bounds = admittance::AdmittanceParams{}.bounds(t.s.mode);
    t.a = bounds.low + (bounds.high - bounds.low) * u(rng);
    t.r = 2.0 * u(rng) - 1.0;
    t.terminal = u(rng) < 0.5;
    b.push_back(t);
  }
  return b;
}

/// Random tanh MLP with 1-3 hidden layers of width 3-8 and one linear output.
inline nn::DenseNet random_net(std::size_t input_dim, Rng& rng) {
  std::uniform_int_distribution<int> depth(1, 3), width(3, 8);
  std::vector<nn::LayerSpec> specs;
  for (int d = depth(rng); d > 0; --d) specs.push_back({static_cast<std::size_t>(width(rng)), nn::Activation::tanh});
  specs.push_back({1, nn::Activation::linear});
  auto net = nn::DenseNet::create(input_dim, specs, rng());
  std::normal_distribution<double> bias(0.0, 0.1);
  for (auto& l : net.layers())
    for (double& b : l.biases) b = bias(rng);
  return net;
}

/// The stateless bandit used to check learnability: reward -(a - 0.42)^2 in the
/// approaching range. Rewards are O(1e-3), so they are scaled up rather than down.
inline rl::AgentConfig bandit_config() {
  rl::AgentConfig c;
  c.gamma = 0.0;
  c.reward_scale = 100.0;
  c.actor_lr = 1e-3;
  c.critic_lr = 1e-2;
  c.tau = 0.05;
  c.noise_std = 0.03;
  c.noise_decay = 0.995;
  c.batch_size = 32;
  return c;
}

/// Greedy action after `updates` training steps (interaction continues while
/// the buffer is warming up; those steps do not count as updates).
inline double run_bandit(std::uint64_t seed, std::size_t updates = 300, double optimum = 0.42) {
  rl::Agent agent(bandit_config(), seed);
  rl::RobotStateVector s;
  s.mode = Mode::approaching;
  std::size_t done = 0;
  while (done < updates) {
    const double a = agent.act(s);
    agent.observe(s, a, -(a - optimum) * (a - optimum), s, true);
    if (agent.train_step()) ++done;
    agent.end_trial();
  }
  return agent.greedy(s);
}

// ------------------------------------------------------ session suite

/// Sessions shared by the adaptation, cost, drift and latency checks. Built
/// lazily; every session uses one classifier trained from the base config.
class SessionSuite {
 public:
  explicit SessionSuite(harness::SessionConfig base = {}, std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5})
      : base_(std::move(base)), seeds_(std::move(seeds)) {}

  const std::vector<std::uint64_t>& seeds() const { return seeds_; }
  const harness::SessionConfig& base() const { return base_; }

  const clf::ClassifierModel& classifier() {
    if (!classifier_) classifier_ = harness::train_session_classifier(base_);
    return *classifier_;
  }

  const std::vector<harness::SessionResult>& sessions(harness::SessionMode mode) {
    auto& v = mode == harness::SessionMode::closed ? closed_ : open_;
    if (v.empty())
      for (auto s : seeds_) {
        auto cfg = base_;
        cfg.mode = mode;
        cfg.seed = s;
        v.push_back(harness::simulate_session(cfg, &classifier()));
      }
    return v;
  }

  /// Mean reward of a frozen sigma1 policy over all seeds.
  double fixed_policy_reward(double sigma1) {
    double total = 0.0;
    std::size_t n = 0;
    for (auto s : seeds_) {
      auto cfg = base_;
      cfg.mode = harness::SessionMode::closed;
      cfg.seed = s;
      cfg.fixed_sigma1 = sigma1;
      for (const auto& t : harness::simulate_session(cfg, &classifier()).trials) {
        total += t.reward;
        ++n;
      }
    }
    return total / static_cast<double>(n);
  }

 private:
  harness::SessionConfig base_;
  std::vector<std::uint64_t> seeds_;
  std::optional<clf::ClassifierModel> classifier_;
  std::vector<harness::SessionResult> closed_, open_;
};

// -------------------------------------------------------------- checks

inline CheckResult check_equation_fixtures() {
  CheckResult r{1, "equation fixtures", false, {}, 0.0};
  std::vector<std::string> failed;
  std::size_t total = 0;
  auto expect = [&](bool ok, const std::string& what) {
    ++total;
    if (!ok) failed.push_back(what);
  };
  {
    rl::Transition t;
    t.r = 100.0;
    const std::array<rl::Transition, 1> b{t};
    const auto y = rl::td_target(b, constant_net(rl::kStateDim + 1, 50.0), constant_net(rl::kStateDim, 0.0), 0.99);
    expect(y[0] == 149.5, "td_target r=100 gamma=0.99 Q'=50");
    const auto y0 = rl::td_target(b, constant_net(rl::kStateDim + 1, 50.0), constant_net(rl::kStateDim, 0.0), 0.0);
    expect(y0[0] == 100.0, "td_target gamma=0");
    rl::Transition term;
    term.r = -100.0;
    term.terminal = true;
    const std::array<rl::Transition, 1> bt{term};
    expect(rl::td_target(bt, constant_net(rl::kStateDim + 1, 50.0), constant_net(rl::kStateDim, 0.0), 0.99)[0] == -100.0,
           "td_target terminal");
  }
  {
    const std::array<rl::Transition, 2> b{};
    const std::array<double, 2> y{1.0, 2.0};
    const auto lg = rl::critic_loss(constant_net(rl::kStateDim + 1, 0.0), b, y);
    expect(lg.value == 2.5, "critic loss y=(1,2) Q=(0,0)");
    const std::array<double, 2> q{3.0, 3.0};
    const auto z = rl::critic_loss(constant_net(rl::kStateDim + 1, 3.0), b, q);
    bool zero = z.value == 0.0;
    z.grads.for_each([&](double g) { zero = zero && g == 0.0; });
    expect(zero, "critic loss at y = Q");
  }
  {
    using clf::compute_reward;
    expect(compute_reward(ConflictClass::none) == 100.0, "reward none");
    expect(compute_reward(ConflictClass::slow) == 50.0, "reward slow");
    expect(compute_reward(ConflictClass::sudden, {5.0}) == -95.0, "reward sudden r'=5");
  }
  {
    auto target = constant_net(3, 0.0), online = constant_net(3, 2.0);
    for (double& w : online.layers()[0].weights.values) w = 2.0;
    auto half = target;
    rl::soft_update(half, online, 0.5);
    bool ok = half.layers()[0].biases[0] == 1.0;
    for (double w : half.layers()[0].weights.values) ok = ok && w == 1.0;
    expect(ok, "soft_update tau=0.5");
    auto copy = target;
    rl::soft_update(copy, online, 1.0);
    expect(copy.layers() == online.layers(), "soft_update tau=1");
    auto same = target;
    rl::soft_update(same, online, 0.0);
    expect(same.layers() == target.layers(), "soft_update tau=0");
  }
  {
    using admittance::clamp_sigma1;
    expect(clamp_sigma1(0.50, Mode::approaching) == 0.45, "clamp 0.50 approaching");
    expect(clamp_sigma1(0.30, Mode::approaching) == 0.35, "clamp 0.30 approaching");
    expect(clamp_sigma1(0.30, Mode::leaving) == 0.30, "clamp 0.30 leaving");
  }
  r.pass = failed.empty();
  r.detail = r.pass ? format("%zu fixtures exact", total) : "failed: " + failed.front();
  return r;
}

inline CheckResult check_gradient_suite(std::size_t nets = 20) {
  CheckResult r{2, "gradient suite", false, {}, 0.0};
  Rng rng(derive_seed(2024, 2));
  double worst_critic = 0.0, worst_actor = 0.0;
  for (std::size_t i = 0; i < nets; ++i) {
    const auto batch = random_batch(rng, 8);
    std::vector<double> y(batch.size());
    std::normal_distribution<double> n01(0.0, 1.0);
    for (double& v : y) v = n01(rng);
    const auto critic = random_net(rl::kStateDim + 1, rng);
    const auto cl = rl::critic_loss(critic, batch, y);
    worst_critic = std::max(worst_critic, parameter_gradient_error(
                                              critic, [&](const nn::DenseNet& c) { return rl::critic_loss(c, batch, y).value; },
                                              cl.grads));
    const auto actor = random_net(rl::kStateDim, rng);
    const auto ac = rl::actor_cost(actor, critic, batch);
    worst_actor = std::max(worst_actor, parameter_gradient_error(
                                            actor, [&](const nn::DenseNet& a) { return rl::actor_cost(a, critic, batch).value; },
                                            ac.grads));
  }
  r.pass = worst_critic < 1e-4 && worst_actor < 1e-4;
  r.detail = format("%zu nets: max rel err critic %.2e, actor %.2e", nets, worst_critic, worst_actor);
  return r;
}

inline CheckResult check_bandit(const std::vector<std::uint64_t>& seeds = {1, 2, 3, 4, 5}) {
  CheckResult r{3, "bandit convergence", false, {}, 0.0};
  std::size_t ok = 0;
  std::string actions;
  for (auto s : seeds) {
    const double a = run_bandit(s);
    ok += std::abs(a - 0.42) < 0.01;
    actions += format(" %.4f", a);
  }
  r.pass = ok >= 4;
  r.detail = format("%zu/%zu seeds within 0.01 of 0.42; a =", ok, seeds.size()) + actions;
  return r;
}

inline CheckResult check_classifier(std::uint64_t seed = 1) {
  CheckResult r{4, "classifier", false, {}, 0.0};
  const op::SyntheticEEGConfig cfg;
  // 600 train / 150 validation / 150 test, balanced
  const auto ds = clf::make_synthetic_dataset(cfg, {200, 50, 50}, seed);
  const auto model = clf::train(ds, seed).model;
  const double acc = clf::accuracy(model, ds, clf::Split::test);

  auto shuffled = ds;
  std::vector<std::size_t> fit;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.splits[i] != clf::Split::test) fit.push_back(i);
  std::vector<ConflictClass> labels;
  for (auto i : fit) labels.push_back(ds.labels[i]);
  Rng rng(derive_seed(seed, 404));
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t k = 0; k < fit.size(); ++k) shuffled.labels[fit[k]] = labels[k];
  const double chance = clf::accuracy(clf::train(shuffled, seed).model, ds, clf::Split::test);

  r.pass = acc >= 0.80 && std::abs(chance - 1.0 / 3.0) <= 0.08;
  r.detail = format("held-out accuracy %.3f (600/150); shuffled-label accuracy %.3f", acc, chance);
  return r;
}

struct AdaptationNumbers {
  std::vector<double> t1, t3;  ///< per-seed sudden rates
  std::vector<double> theta1, theta3;
  double median_change() const { return median(t3) / median(t1) - 1.0; }
  static double median(std::vector<double> v) { return harness::median(std::move(v)); }
};

inline AdaptationNumbers adaptation_numbers(const std::vector<harness::SessionResult>& sessions) {
  AdaptationNumbers n;
  for (const auto& s : sessions) {
    const auto a = harness::analyze_session(s, false);
    n.t1.push_back(a.sudden_rate[0]);
    n.t3.push_back(a.sudden_rate[2]);
    n.theta1.push_back(a.frontal_band(eeg::Band::theta, 0).mean);
    n.theta3.push_back(a.frontal_band(eeg::Band::theta, 2).mean);
  }
  return n;
}

inline CheckResult check_adaptation(SessionSuite& suite) {
  CheckResult r{5, "closed-loop adaptation", false, {}, 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  const auto closed = adaptation_numbers(suite.sessions(harness::SessionMode::closed));
  const double closed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto t1 = std::chrono::steady_clock::now();
  const auto open = adaptation_numbers(suite.sessions(harness::SessionMode::open));
  const double open_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  std::size_t theta_down = 0;
  for (std::size_t i = 0; i < closed.theta1.size(); ++i) theta_down += closed.theta3[i] < closed.theta1[i];
  const double cc = closed.median_change(), oc = open.median_change();
  const bool closed_ok = cc <= -0.30, open_ok = std::abs(oc) < 0.10, theta_ok = theta_down >= 4;
  r.pass = closed_ok && open_ok && theta_ok && closed_s < 900.0 && open_s < 900.0;
  r.detail = format("sudden rate T1->T3 closed %+.1f%% (%s), open %+.1f%% (%s); Fz theta down %zu/%zu; %.0fs/%.0fs", 100 * cc,
                    closed_ok ? "ok" : "FAIL", 100 * oc, open_ok ? "ok" : "FAIL", theta_down, closed.theta1.size(), closed_s,
                    open_s);
  return r;
}

inline CheckResult check_cost_trend(SessionSuite& suite) {
  CheckResult r{6, "cost trend", false, {}, 0.0};
  std::size_t ok = 0, n = 0;
  for (const auto& s : suite.sessions(harness::SessionMode::closed)) {
    const auto a = harness::analyze_session(s, false);
    if (a.costs.size() < 40) continue;
    ++n;
    bool seed_ok = true;
    for (bool actor : {true, false}) {
      std::vector<double> c;
      for (const auto& row : a.costs) c.push_back(actor ? row.actor : row.critic);
      const auto ma = harness::moving_average(c, 10);
      const double initial = ma[9], at40 = ma[39], final = ma.back();
      seed_ok = seed_ok && at40 < initial && final < initial;
    }
    ok += seed_ok;
  }
  r.pass = ok >= 4;
  r.detail = format("actor and critic MA10 at trial 40 and final below trials 1-10 on %zu/%zu seeds", ok, n);
  return r;
}

inline CheckResult check_action_drift(SessionSuite& suite) {
  CheckResult r{7, "action drift", false, {}, 0.0};
  const auto& ab = admittance::kApproachingBounds;
  double best = -std::numeric_limits<double>::infinity(), best_sigma = 0.0;
  const int steps = static_cast<int>(std::lround((ab.high - ab.low) / 0.01));
  for (int i = 0; i <= steps; ++i) {
    const double g = ab.low + 0.01 * i;
    const double reward = suite.fixed_policy_reward(g);
    if (reward > best) {
      best = reward;
      best_sigma = g;
    }
  }
  std::vector<double> last20, first10;
  std::size_t upward = 0;
  for (const auto& s : suite.sessions(harness::SessionMode::closed)) {
    const auto& t = s.trials;
    double l = 0.0, f = 0.0;
    for (std::size_t i = t.size() - 20; i < t.size(); ++i) l += t[i].sigma1_approach / 20.0;
    for (std::size_t i = 0; i < 10; ++i) f += t[i].sigma1_approach / 10.0;
    last20.push_back(l);
    first10.push_back(f);
    upward += l > f;
  }
  const double m_last = harness::median(last20), m_first = harness::median(first10);
  r.pass = std::abs(m_last - best_sigma) <= 0.02 && m_last > m_first && upward * 2 > last20.size();
  r.detail = format("grid optimum %.2f (mean reward %.1f); final-20 median %.4f, first-10 median %.4f, up on %zu/%zu seeds",
                    best_sigma, best, m_last, m_first, upward, last20.size());
  return r;
}

inline CheckResult check_signal_pipeline() {
  CheckResult r{8, "signal pipeline", false, {}, 0.0};
  std::vector<std::string> failed;
  std::vector<double> s6(1000);
  for (std::size_t i = 0; i < s6.size(); ++i) s6[i] = std::sin(2.0 * std::numbers::pi * 6.0 * static_cast<double>(i) / 250.0);
  const auto psd = eeg::welch_psd(s6, 250.0, 256, 0.5);
  const auto& p = psd.power.values;
  const auto peak = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  const auto nearest = static_cast<std::size_t>(std::lround(6.0 / psd.resolution()));
  if (peak != nearest) failed.push_back("6 Hz peak bin");
  double integral = 0.0;
  for (double v : p) integral += v * psd.resolution();
  const double parseval = integral / 0.5 - 1.0;
  if (std::abs(parseval) > 0.02) failed.push_back("Parseval");

  std::vector<double> s10(4000), ref(1000);
  for (std::size_t i = 0; i < s10.size(); ++i) s10[i] = std::sin(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / 1000.0);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = std::sin(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / 250.0);
  const auto down = eeg::resample_1000_250(s10);
  if (down.size() != 1000) failed.push_back("resample length");
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sxy += down[i] * ref[i];
    sxx += down[i] * down[i];
    syy += ref[i] * ref[i];
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  if (corr < 0.99) failed.push_back("resample fidelity");
  const std::vector<double> dc(4000, 3.25);
  for (double v : eeg::resample_1000_250(dc))
    if (std::abs(v - 3.25) > 1e-9) {
      failed.push_back("resample DC");
      break;
    }

  eeg::EEGEpoch rec250;
  rec250.sample_rate = 250.0;
  rec250.data = nn::Tensor2D(2, 1000);
  eeg::EEGEpoch rec1000;
  rec1000.data = nn::Tensor2D(2, 4000);
  const auto e100 = eeg::extract_epoch(rec250, 1.0, 0.4).samples();
  const auto e1200 = eeg::extract_epoch(rec1000, 1.0, 1.2).samples();
  if (e100 != 100 || e1200 != 1200) failed.push_back("epoch sample counts");

  r.pass = failed.empty();
  r.detail = format("peak bin %zu (expect %zu), Parseval %+.2f%%, resample corr %.4f, epochs %zu/%zu", peak, nearest,
                    100 * parseval, corr, e100, e1200) +
             (r.pass ? "" : "; failed: " + failed.front());
  return r;
}

inline CheckResult check_kinematics() {
  CheckResult r{9, "kinematics", false, {}, 0.0};
  const std::array<double, 2> lengths{1.0, 1.0};
  const auto arm2 = arm::planar_arm(lengths);
  const std::array<double, 2> straight{0.0, 0.0}, bent{0.0, std::numbers::pi / 2};
  const double s_straight = arm::singularity_measure(arm2, straight).sigma_min;
  const auto sv = arm::singular_values(arm::jacobian(arm2, bent));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double golden_err = std::max(std::abs(sv[0] - phi), std::abs(sv[1] - (phi - 1.0)));

  double fd_err = 0.0;
  Rng rng(derive_seed(9, 9));
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (const auto& model : {arm2, arm::default_arm()}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> q(model.joint_count());
      for (double& v : q) v = u(rng);
      const auto J = arm::jacobian(model, q);
      const double h = 1e-6;
      for (std::size_t j = 0; j < q.size(); ++j) {
        auto qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        const auto pp = arm::task_position(model, qp), pm = arm::task_position(model, qm);
        for (std::size_t i = 0; i < J.rows; ++i) fd_err = std::max(fd_err, std::abs(J(i, j) - (pp[i] - pm[i]) / (2 * h)));
      }
    }
  }
  r.pass = s_straight < 1e-10 && golden_err < 1e-9 && fd_err < 1e-6;
  r.detail = format("straight sigma_min %.1e, golden-ratio error %.1e, Jacobian FD error %.1e", s_straight, golden_err, fd_err);
  return r;
}

inline std::map<std::string, std::string> read_dir_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream is(e.path(), std::ios::binary);
    out[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(is), {});
  }
  return out;
}

inline CheckResult check_determinism(const std::filesystem::path& scratch, SessionSuite& suite) {
  CheckResult r{10, "determinism", false, {}, 0.0};
  auto cfg = suite.base();
  cfg.mode = harness::SessionMode::closed;
  cfg.seed = 7;
  std::vector<std::map<std::string, std::string>> runs;
  for (int k = 0; k < 3; ++k) {
    auto c = cfg;
    c.pipelined = k == 2;
    const auto dir = scratch / format("run%d", k);
    std::filesystem::remove_all(dir);
    harness::write_session_logs(harness::simulate_session(c, &suite.classifier()), dir);
    runs.push_back(read_dir_bytes(dir));
  }
  std::size_t bytes = 0;
  for (const auto& [_, b] : runs[0]) bytes += b.size();
  const bool repeat = runs[0] == runs[1], pipelined = runs[0] == runs[2];
  r.pass = repeat && pipelined && runs[0].size() >= 7;
  r.detail = format("%zu files, %zu bytes; repeat run %s, pipelined run %s", runs[0].size(), bytes,
                    repeat ? "identical" : "DIFFERS", pipelined ? "identical" : "DIFFERS");
  return r;
}

inline CheckResult check_statistics(std::size_t tables = 100) {
  CheckResult r{11, "statistics", false, {}, 0.0};
  const auto fixture = stats::MeasurementTable::from_rows({{3, 5, 4}, {4, 7, 6}, {6, 9, 8}, {5, 8, 9}});
  // by hand: grand mean 37/6, SS_total 137/3, SS_subjects 77/3, SS_conditions 103/6,
  // SS_error 17/6, so F = (103/12) / (17/36) = 309/17
  const double oracle = 309.0 / 17.0;
  const double f = stats::rm_anova_oneway(fixture).F;
  const double fixture_err = std::abs(f - oracle);

  Rng rng(derive_seed(11, 11));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> dim(2, 8);
  std::size_t ok = 0;
  for (std::size_t k = 0; k < tables; ++k) {
    stats::MeasurementTable t;
    t.subjects = static_cast<std::size_t>(dim(rng));
    t.conditions = static_cast<std::size_t>(dim(rng));
    for (std::size_t i = 0; i < t.subjects * t.conditions; ++i) t.values.push_back(n01(rng));
    const auto base = stats::rm_anova_oneway(t);
    auto shifted = t, scaled = t, global = t;
    for (std::size_t s = 0; s < t.subjects; ++s) {
      const double c = 10.0 * n01(rng);
      for (std::size_t j = 0; j < t.conditions; ++j) shifted(s, j) += c;
    }
    const double g = 5.0 + std::abs(n01(rng)), shift = 3.0 * n01(rng);
    for (double& v : scaled.values) v *= g;
    for (double& v : global.values) v += shift;
    const auto rel = [&](double x) { return std::abs(x - base.F) / std::max(1.0, std::abs(base.F)); };
    const double ss_sum = base.ss_subjects + base.ss_conditions + base.ss_error;
    ok += rel(stats::rm_anova_oneway(shifted).F) < 1e-9 && rel(stats::rm_anova_oneway(scaled).F) < 1e-9 &&
          rel(stats::rm_anova_oneway(global).F) < 1e-9 && std::abs(ss_sum - base.ss_total) <= 1e-9 * base.ss_total;
  }
  r.pass = fixture_err < 1e-9 && ok == tables;
  r.detail = format("fixture F %.12f (oracle %.12f); invariances hold on %zu/%zu tables", f, oracle, ok, tables);
  return r;
}

inline CheckResult check_latency(SessionSuite& suite) {
  CheckResult r{12, "latency", false, {}, 0.0};
  const auto& cfg = suite.base();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0, bad = 0;
  for (const auto& s : suite.sessions(harness::SessionMode::closed)) {
    for (std::size_t k = 1; k < s.trials.size(); ++k) {
      const auto& t = s.trials[k];
      if (!t.decision_delay) {
        ++bad;
        continue;
      }
      // the logged delay must agree with the timestamps it is derived from
      const double from_stamps = t.action_time - s.trials[k - 1].epoch_end;
      const double d = *t.decision_delay;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      ++n;
      if (d < cfg.latency_min || d > cfg.latency_max || std::abs(from_stamps - d) > 1e-9) ++bad;
    }
  }
  r.pass = n > 0 && bad == 0;
  r.detail = format("%zu epoch->action delays in [%.1f, %.1f] ms, %zu outside [%.0f, %.0f] ms", n, 1e3 * lo, 1e3 * hi, bad,
                    1e3 * cfg.latency_min, 1e3 * cfg.latency_max);
  return r;
}

/// Runtime budget per check, seconds. Check 5 times each mode itself.
inline double time_limit(int id) {
  switch (id) {
    case 1: return 1.0;
    case 2:
    case 3: return 60.0;
    case 4: return 300.0;
    default: return std::numeric_limits<double>::infinity();
  }
}

inline constexpr std::array<int, 5> kFastChecks{1, 2, 8, 9, 11};

/// Runs the requested checks in id order; `scratch` holds determinism logs.
inline std::vector<CheckResult> run_checks(std::vector<int> ids, const std::filesystem::path& scratch,
                                           SessionSuite& suite, const std::function<void(const CheckResult&)>& on_done = {}) {
  std::sort(ids.begin(), ids.end());
  std::vector<CheckResult> out;
  for (int id : ids) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult res;
    switch (id) {
      case 1: res = check_equation_fixtures(); break;
      case 2: res = check_gradient_suite(); break;
      case 3: res = check_bandit(); break;
      case 4: res = check_classifier(); break;
      case 5: res = check_adaptation(suite); break;
      case 6: res = check_cost_trend(suite); break;
      case 7: res = check_action_drift(suite); break;
      case 8: res = check_signal_pipeline(); break;
      case 9: res = check_kinematics(); break;
      case 10: res = check_determinism(scratch, suite); break;
      case 11: res = check_statistics(); break;
      case 12: res = check_latency(suite); break;
      default: throw std::invalid_argument("unknown check id " + std::to_string(id));
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (const double limit = time_limit(id); res.seconds > limit) {
      res.pass = false;
      res.detail += format("; over the %.0f s budget", limit);
    }
    if (on_done) on_done(res);
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace neuroadapt::checks

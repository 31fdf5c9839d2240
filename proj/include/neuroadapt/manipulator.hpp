#pragma once

// Serial-arm kinematics: Denavit-Hartenberg forward kinematics, geometric
// Jacobian, singular values and the smallest-singular-value proximity measure.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neuroadapt/common.hpp"
#include "neuroadapt/config.hpp"
#include "neuroadapt/neuralnet.hpp"

namespace neuroadapt::arm {

using nn::Tensor2D;

/// Standard DH row for a revolute joint.
struct DHRow {
  double a = 0.0;             ///< link length, m
  double alpha = 0.0;         ///< link twist, rad
  double d = 0.0;             ///< link offset, m
  double theta_offset = 0.0;  ///< joint angle offset, rad
};

struct JointLimit {
  double low = -std::numbers::pi;
  double high = std::numbers::pi;
};

struct ArmModel {
  std::vector<DHRow> joints;
  std::vector<JointLimit> limits;
  /// Cartesian position rows used as the task space (2 = planar x/y).
  std::size_t task_dims = 2;

  std::size_t joint_count() const { return joints.size(); }

  void validate() const {
    if (joints.size() < 2) throw std::invalid_argument("arm needs at least two joints");
    if (limits.size() != joints.size()) throw std::invalid_argument("one joint limit per joint required");
    for (const auto& l : limits)
      if (!(l.low < l.high)) throw std::invalid_argument("joint limits must satisfy low < high");
    if (task_dims < 1 || task_dims > 3) throw std::invalid_argument("task_dims must be 1..3");
  }
};

inline ArmModel planar_arm(std::span<const double> lengths, JointLimit limit = {}) {
  ArmModel m;
  for (double l : lengths) {
    m.joints.push_back({l, 0.0, 0.0, 0.0});
    m.limits.push_back(limit);
  }
  m.task_dims = 2;
  m.validate();
  return m;
}

/// Shoulder/elbow/wrist planar arm; stretching the elbow drives it singular.
inline ArmModel default_arm() {
  const std::array<double, 3> lengths{0.85, 0.7, 0.3};
  ArmModel m = planar_arm(lengths);
  // elbow bends one way only so the stretched pose is the reachable boundary
  m.limits[1] = {0.0, 2.8};
  m.limits[2] = {-2.0, 2.0};
  return m;
}

/// UR10-like 6-joint DH table (nominal published geometry).
inline ArmModel ur10_like_arm() {
  constexpr double half_pi = std::numbers::pi / 2.0;
  ArmModel m;
  m.joints = {{0.0, half_pi, 0.1273, 0.0},  {-0.612, 0.0, 0.0, 0.0},    {-0.5723, 0.0, 0.0, 0.0},
              {0.0, half_pi, 0.163941, 0.0}, {0.0, -half_pi, 0.1157, 0.0}, {0.0, 0.0, 0.0922, 0.0}};
  m.limits.assign(6, JointLimit{-2.0 * std::numbers::pi, 2.0 * std::numbers::pi});
  m.task_dims = 3;
  m.validate();
  return m;
}

/// Reads `arm.task_dims` and `dh.N.{a,alpha,d,theta,min,max}` rows (N from 0).
/// Falls back to `fallback` when no dh rows are present.
inline ArmModel arm_from_config(const Config& cfg, const ArmModel& fallback = default_arm()) {
  if (!cfg.has("dh.0.a")) return fallback;
  ArmModel m;
  for (std::size_t i = 0;; ++i) {
    const std::string p = "dh." + std::to_string(i) + ".";
    if (!cfg.has(p + "a")) break;
    m.joints.push_back({cfg.get_double(p + "a"), cfg.get_double(p + "alpha", 0.0), cfg.get_double(p + "d", 0.0),
                        cfg.get_double(p + "theta", 0.0)});
    m.limits.push_back({cfg.get_double(p + "min", -std::numbers::pi), cfg.get_double(p + "max", std::numbers::pi)});
  }
  m.task_dims = static_cast<std::size_t>(cfg.get_int("arm.task_dims", 2));
  m.validate();
  return m;
}

struct Pose {
  std::array<double, 3> position{};
  /// Row-major rotation matrix of the end-effector frame.
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

namespace detail {

using Frame = std::array<double, 16>;

inline Frame identity_frame() { return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}; }

inline Frame compose(const Frame& a, const Frame& b) {
  Frame r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 4 + j];
      r[i * 4 + j] = s;
    }
  return r;
}

inline Frame dh_transform(const DHRow& row, double q) {
  const double th = q + row.theta_offset;
  const double ct = std::cos(th), st = std::sin(th);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  return {ct, -st * ca, st * sa, row.a * ct, st, ct * ca, -ct * sa, row.a * st, 0, sa, ca, row.d, 0, 0, 0, 1};
}

/// Base-to-frame-i transforms for i = 0..n.
inline std::vector<Frame> chain(const ArmModel& model, std::span<const double> q) {
  if (q.size() != model.joint_count()) throw ShapeError("joint vector length does not match arm");
  std::vector<Frame> frames{identity_frame()};
  for (std::size_t i = 0; i < model.joint_count(); ++i)
    frames.push_back(compose(frames.back(), dh_transform(model.joints[i], q[i])));
  return frames;
}

}  // namespace detail

inline Pose forward_kinematics(const ArmModel& model, std::span<const double> q) {
  const auto frames = detail::chain(model, q);
  const auto& t = frames.back();
  Pose p;
  p.position = {t[3], t[7], t[11]};
  p.rotation = {t[0], t[1], t[2], t[4], t[5], t[6], t[8], t[9], t[10]};
  return p;
}

/// Task-space position of the end effector (first task_dims coordinates).
inline std::vector<double> task_position(const ArmModel& model, std::span<const double> q) {
  const auto p = forward_kinematics(model, q).position;
  return {p.begin(), p.begin() + static_cast<std::ptrdiff_t>(model.task_dims)};
}

/// Geometric position Jacobian (task_dims x joints) for revolute joints.
inline Tensor2D jacobian(const ArmModel& model, std::span<const double> q) {
  const auto frames = detail::chain(model, q);
  const auto& te = frames.back();
  const std::array<double, 3> pe{te[3], te[7], te[11]};
  Tensor2D j(model.task_dims, model.joint_count());
  for (std::size_t i = 0; i < model.joint_count(); ++i) {
    const auto& f = frames[i];
    const std::array<double, 3> z{f[2], f[6], f[10]};
    const std::array<double, 3> r{pe[0] - f[3], pe[1] - f[7], pe[2] - f[11]};
    const std::array<double, 3> c{z[1] * r[2] - z[2] * r[1], z[2] * r[0] - z[0] * r[2], z[0] * r[1] - z[1] * r[0]};
    for (std::size_t k = 0; k < model.task_dims; ++k) j(k, i) = c[k];
  }
  return j;
}

struct SymmetricEigen {
  std::vector<double> values;  ///< descending
  Tensor2D vectors;            ///< column k pairs with values[k]
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix; stops when the
/// off-diagonal Frobenius norm falls below `tolerance`.
inline SymmetricEigen symmetric_eigen(Tensor2D a, double tolerance = 1e-12, int max_sweeps = 100) {
  if (a.rows != a.cols) throw ShapeError("symmetric_eigen: matrix must be square");
  const std::size_t n = a.rows;
  Tensor2D v = Tensor2D::identity(n);
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tolerance; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen e;
  e.vectors = Tensor2D(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    e.values.push_back(a(order[k], order[k]));
    for (std::size_t r = 0; r < n; ++r) e.vectors(r, k) = v(r, order[k]);
  }
  return e;
}

/// Singular values (descending, min(rows, cols) of them) from the smaller Gram matrix.
inline std::vector<double> singular_values(const Tensor2D& j) {
  if (!all_finite(j.values)) throw std::invalid_argument("singular_values: non-finite matrix");
  const Tensor2D jt = j.transposed();
  const Tensor2D gram = j.rows < j.cols ? matmul(j, jt) : matmul(jt, j);
  auto e = symmetric_eigen(gram);
  std::vector<double> s;
  s.reserve(e.values.size());
  for (double l : e.values) s.push_back(std::sqrt(std::max(l, 0.0)));
  return s;
}

struct SingularityReading {
  double sigma_min = 0.0;
  Mode mode = Mode::leaving;
};

/// Smallest singular value of the Jacobian; approaching iff it dropped since `previous`.
inline SingularityReading singularity_measure(const ArmModel& model, std::span<const double> q,
                                              std::optional<SingularityReading> previous = std::nullopt) {
  const auto s = singular_values(jacobian(model, q));
  SingularityReading r;
  r.sigma_min = s.empty() ? 0.0 : s.back();
  r.mode = previous && r.sigma_min < previous->sigma_min ? Mode::approaching : Mode::leaving;
  return r;
}

/// Streams sigma_min and reports the mode from a moving average of the last
/// `window` samples, which suppresses chatter from integration noise.
class SingularityTracker {
 public:
  explicit SingularityTracker(std::size_t window = 5) : window_(window) {}

  SingularityReading update(double sigma_min) {
    history_.push_back(sigma_min);
    if (history_.size() > window_) history_.pop_front();
    double avg = 0.0;
    for (double s : history_) avg += s;
    avg /= static_cast<double>(history_.size());
    SingularityReading r{sigma_min, Mode::leaving};
    if (last_avg_ && avg < *last_avg_) r.mode = Mode::approaching;
    last_avg_ = avg;
    return r;
  }

 private:
  std::size_t window_;
  std::deque<double> history_;
  std::optional<double> last_avg_;
};

/// Damped-least-squares joint velocity: J^T (J J^T + lambda^2 I)^-1 v.
/// Directions with zero curvature are dropped when lambda = 0.
inline std::vector<double> dls_velocity(const Tensor2D& j, std::span<const double> v_task, double dls_lambda) {
  if (v_task.size() != j.rows) throw ShapeError("task velocity length does not match Jacobian rows");
  if (dls_lambda < 0.0) throw std::invalid_argument("dls_lambda must be >= 0");
  Tensor2D g = matmul(j, j.transposed());
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) += dls_lambda * dls_lambda;
  const auto e = symmetric_eigen(g);
  const double scale = std::max(1.0, e.values.empty() ? 0.0 : e.values.front());
  // w = V diag(1/l) V^T v
  std::vector<double> w(g.rows, 0.0);
  for (std::size_t k = 0; k < e.values.size(); ++k) {
    if (e.values[k] <= 1e-12 * scale) continue;
    double proj = 0.0;
    for (std::size_t r = 0; r < g.rows; ++r) proj += e.vectors(r, k) * v_task[r];
    proj /= e.values[k];
    for (std::size_t r = 0; r < g.rows; ++r) w[r] += e.vectors(r, k) * proj;
  }
  std::vector<double> qdot(j.cols, 0.0);
  for (std::size_t c = 0; c < j.cols; ++c)
    for (std::size_t r = 0; r < j.rows; ++r) qdot[c] += j(r, c) * w[r];
  return qdot;
}

inline std::vector<double> clamp_to_limits(const ArmModel& model, std::vector<double> q) {
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::clamp(q[i], model.limits[i].low, model.limits[i].high);
  return q;
}

/// Advances joints by the DLS velocity for `dt` seconds and clamps to limits.
inline std::vector<double> joint_step(const ArmModel& model, std::span<const double> q, std::span<const double> v_task,
                                      double dt, double dls_lambda) {
  if (!(dt > 0.0)) throw std::invalid_argument("joint_step: dt must be positive");
  if (q.size() != model.joint_count()) throw ShapeError("joint vector length does not match arm");
  const auto qdot = dls_velocity(jacobian(model, q), v_task, dls_lambda);
  std::vector<double> next(q.begin(), q.end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += qdot[i] * dt;
  return clamp_to_limits(model, std::move(next));
}

}  // namespace neuroadapt::arm

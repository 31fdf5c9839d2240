#pragma once

// Virtual mass-damper admittance with singularity-dependent extra damping.
// Damping ramps linearly from lambda_max at sigma_min <= sigma0_bar down to
// zero at sigma_min >= sigma1_bar.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "neuroadapt/common.hpp"
#include "neuroadapt/config.hpp"

namespace neuroadapt::admittance {

struct SigmaBounds {
  double low;
  double high;
  double midpoint() const { return 0.5 * (low + high); }
  double halfwidth() const { return 0.5 * (high - low); }
  bool contains(double x) const { return x >= low && x <= high; }
};

inline constexpr SigmaBounds kApproachingBounds{0.35, 0.45};
inline constexpr SigmaBounds kLeavingBounds{0.25, 0.45};
inline constexpr double kClosedLoopSigma0 = 0.25;

struct AdmittanceParams {
  double virtual_mass = 8.0;   ///< kg
  double base_damping = 15.0;  ///< N s/m
  double lambda_max = 40.0;    ///< N s/m, peak singularity damping
  double sigma0_bar = kClosedLoopSigma0;
  double sigma1_bar = 0.40;
  SigmaBounds bounds_approaching = kApproachingBounds;
  SigmaBounds bounds_leaving = kLeavingBounds;

  const SigmaBounds& bounds(Mode m) const { return m == Mode::approaching ? bounds_approaching : bounds_leaving; }

  /// sigma0_bar == sigma1_bar is accepted and yields a step schedule; this
  /// occurs when the leaving-mode sigma1 sits on its 0.25 lower bound.
  void validate() const {
    if (!(virtual_mass > 0.0)) throw std::invalid_argument("virtual mass must be positive");
    if (!(base_damping >= 0.0)) throw std::invalid_argument("base damping must be non-negative");
    if (!(lambda_max > 0.0)) throw std::invalid_argument("lambda_max must be positive");
    if (!(sigma0_bar <= sigma1_bar)) throw std::invalid_argument("sigma0_bar must not exceed sigma1_bar");
  }
};

inline AdmittanceParams params_from_config(const Config& cfg, AdmittanceParams p = {}) {
  p.virtual_mass = cfg.get_double("admittance.mass", p.virtual_mass);
  p.base_damping = cfg.get_double("admittance.base_damping", p.base_damping);
  p.lambda_max = cfg.get_double("admittance.lambda_max", p.lambda_max);
  p.bounds_approaching.low = cfg.get_double("admittance.approaching.low", p.bounds_approaching.low);
  p.bounds_approaching.high = cfg.get_double("admittance.approaching.high", p.bounds_approaching.high);
  p.bounds_leaving.low = cfg.get_double("admittance.leaving.low", p.bounds_leaving.low);
  p.bounds_leaving.high = cfg.get_double("admittance.leaving.high", p.bounds_leaving.high);
  p.validate();
  return p;
}

struct MotionState {
  std::vector<double> velocity;
  std::vector<double> acceleration;

  static MotionState rest(std::size_t dims) { return {std::vector<double>(dims, 0.0), std::vector<double>(dims, 0.0)}; }
};

/// Extra damping for the current singularity proximity.
inline double damping_schedule(double sigma_min, const AdmittanceParams& p) {
  if (sigma_min <= p.sigma0_bar) return p.lambda_max;
  if (sigma_min >= p.sigma1_bar) return 0.0;
  return p.lambda_max * (p.sigma1_bar - sigma_min) / (p.sigma1_bar - p.sigma0_bar);
}

/// Semi-implicit Euler step of M a + (D + lambda(sigma)) v = F.
inline MotionState admittance_step(std::span<const double> force, const MotionState& state, const AdmittanceParams& p,
                                   double sigma_min, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("admittance_step: dt must be positive");
  if (!all_finite(force)) throw std::invalid_argument("admittance_step: non-finite force");
  if (force.size() != state.velocity.size()) throw ShapeError("force and velocity dimensions differ");
  const double damping = p.base_damping + damping_schedule(sigma_min, p);
  MotionState next = state;
  for (std::size_t i = 0; i < force.size(); ++i) {
    const double a = (force[i] - damping * state.velocity[i]) / p.virtual_mass;
    next.acceleration[i] = a;
    next.velocity[i] = state.velocity[i] + a * dt;
  }
  if (!all_finite(next.velocity)) throw DivergenceError("admittance_step: non-finite velocity");
  return next;
}

/// Projects an agent action onto the active mode's sigma1 range.
inline double clamp_sigma1(double raw_action, Mode mode, const AdmittanceParams& p = {}) {
  if (!std::isfinite(raw_action)) throw std::invalid_argument("clamp_sigma1: non-finite action");
  const auto& b = p.bounds(mode);
  return std::clamp(raw_action, b.low, b.high);
}

}  // namespace neuroadapt::admittance

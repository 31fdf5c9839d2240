#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "neuroadapt/manipulator.hpp"

using namespace neuroadapt;
using namespace neuroadapt::arm;

namespace {

constexpr double kPi = std::numbers::pi;

ArmModel two_link() {
  const std::array<double, 2> lengths{1.0, 1.0};
  return planar_arm(lengths);
}

Tensor2D fd_jacobian(const ArmModel& m, std::vector<double> q, double h = 1e-6) {
  Tensor2D j(m.task_dims, m.joint_count());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double saved = q[i];
    q[i] = saved + h;
    const auto p = task_position(m, q);
    q[i] = saved - h;
    const auto n = task_position(m, q);
    q[i] = saved;
    for (std::size_t k = 0; k < m.task_dims; ++k) j(k, i) = (p[k] - n[k]) / (2.0 * h);
  }
  return j;
}

void expect_matrix_near(const Tensor2D& a, const Tensor2D& b, double tol) {
  ASSERT_EQ(a.rows, b.rows);
  ASSERT_EQ(a.cols, b.cols);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], tol) << "entry " << i;
}

}  // namespace

TEST(ForwardKinematics, TwoLinkExamples) {
  const auto m = two_link();
  const auto p0 = task_position(m, std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(p0[0], 2.0, 1e-12);
  EXPECT_NEAR(p0[1], 0.0, 1e-12);
  const auto p1 = task_position(m, std::vector<double>{kPi / 2.0, 0.0});
  EXPECT_NEAR(p1[0], 0.0, 1e-12);
  EXPECT_NEAR(p1[1], 2.0, 1e-12);
  const auto p2 = task_position(m, std::vector<double>{0.0, kPi / 2.0});
  EXPECT_NEAR(p2[0], 1.0, 1e-12);
  EXPECT_NEAR(p2[1], 1.0, 1e-12);
}

TEST(Jacobian, TwoLinkSymbolic) {
  const auto m = two_link();
  expect_matrix_near(jacobian(m, std::vector<double>{0.0, kPi / 2.0}), Tensor2D::from_rows({{-1.0, -1.0}, {1.0, 0.0}}), 1e-12);
  expect_matrix_near(jacobian(m, std::vector<double>{0.0, 0.0}), Tensor2D::from_rows({{0.0, 0.0}, {2.0, 1.0}}), 1e-12);
}

TEST(Jacobian, FiniteDifferenceAgreementAtRandomConfigurations) {
  Rng rng(derive_seed(4, 4));
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (const auto& m : {two_link(), default_arm(), ur10_like_arm()}) {
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> q(m.joint_count());
      for (double& v : q) v = u(rng);
      expect_matrix_near(jacobian(m, q), fd_jacobian(m, q), 1e-6);
    }
  }
}

TEST(SingularValues, Examples) {
  const auto id = singular_values(Tensor2D::identity(2));
  EXPECT_NEAR(id[0], 1.0, 1e-12);
  EXPECT_NEAR(id[1], 1.0, 1e-12);
  const auto golden = singular_values(Tensor2D::from_rows({{-1.0, -1.0}, {1.0, 0.0}}));
  EXPECT_NEAR(golden[0], (1.0 + std::sqrt(5.0)) / 2.0, 1e-10);
  EXPECT_NEAR(golden[1], (std::sqrt(5.0) - 1.0) / 2.0, 1e-10);
  const auto rank1 = singular_values(Tensor2D::from_rows({{0.0, 0.0}, {2.0, 1.0}}));
  EXPECT_NEAR(rank1[0], std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(rank1[1], 0.0, 1e-12);
}

TEST(SingularValues, OrderingAndFrobeniusOnRandomMatrices) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> dim(1, 6);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor2D j(static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng)));
    double fro = 0.0;
    for (double& v : j.values) {
      v = n(rng);
      fro += v * v;
    }
    const auto s = singular_values(j);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_GE(s[i], 0.0);
      if (i > 0) {
        EXPECT_LE(s[i], s[i - 1]);
      }
      sum += s[i] * s[i];
    }
    EXPECT_NEAR(sum, fro, 1e-9 * fro) << "seed " << seed;
  }
}

TEST(SingularityMeasure, Examples) {
  const auto m = two_link();
  EXPECT_LT(singularity_measure(m, std::vector<double>{0.0, 0.0}).sigma_min, 1e-10);
  const auto r = singularity_measure(m, std::vector<double>{0.0, kPi / 2.0}, SingularityReading{0.70, Mode::leaving});
  EXPECT_NEAR(r.sigma_min, 0.6180339887, 1e-9);
  EXPECT_EQ(r.mode, Mode::approaching);
  const auto same = singularity_measure(m, std::vector<double>{0.0, kPi / 2.0}, r);
  EXPECT_EQ(same.mode, Mode::leaving);
}

TEST(SingularityTracker, MovingAverageSuppressesChatter) {
  SingularityTracker t(5);
  EXPECT_EQ(t.update(0.5).mode, Mode::leaving);
  for (double s : {0.49, 0.48, 0.47, 0.46}) EXPECT_EQ(t.update(s).mode, Mode::approaching);
  // one small uptick inside a falling trend keeps the averaged mode
  EXPECT_EQ(t.update(0.465).mode, Mode::approaching);
  for (int i = 0; i < 5; ++i) t.update(0.6);
  EXPECT_EQ(t.update(0.6).mode, Mode::leaving);
}

TEST(JointStep, IdentityJacobian) {
  const auto qdot = dls_velocity(Tensor2D::identity(2), std::vector<double>{1.0, 0.0}, 0.0);
  EXPECT_NEAR(qdot[0] * 0.1, 0.1, 1e-12);
  EXPECT_NEAR(qdot[1] * 0.1, 0.0, 1e-12);
}

TEST(JointStep, DiagonalJacobian) {
  const auto qdot = dls_velocity(Tensor2D::from_rows({{2.0, 0.0}, {0.0, 1.0}}), std::vector<double>{2.0, 1.0}, 0.0);
  EXPECT_NEAR(qdot[0], 1.0, 1e-12);
  EXPECT_NEAR(qdot[1], 1.0, 1e-12);
}

TEST(JointStep, DampedAtSingularityIsBounded) {
  const Tensor2D j = Tensor2D::from_rows({{0.0, 0.0}, {2.0, 1.0}});
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> v{n(rng), n(rng)};
    const auto qdot = dls_velocity(j, v, 0.1);
    EXPECT_TRUE(all_finite(qdot));
    EXPECT_LE(norm2(qdot), norm2(v) / 0.1 + 1e-12);
  }
}

TEST(JointStep, AdvancesAndClamps) {
  const auto m = two_link();
  const std::vector<double> q{0.0, kPi / 2.0};
  const std::vector<double> v{0.1, 0.0};
  const auto next = joint_step(m, q, v, 0.1, 0.0);
  const auto qdot = dls_velocity(jacobian(m, q), v, 0.0);
  EXPECT_NEAR(next[0], q[0] + 0.1 * qdot[0], 1e-12);
  EXPECT_NEAR(next[1], q[1] + 0.1 * qdot[1], 1e-12);

  const auto limited = planar_arm(std::array<double, 2>{1.0, 1.0}, JointLimit{-0.5, 0.5});
  const auto clamped = joint_step(limited, std::vector<double>{0.49, 0.2}, std::vector<double>{0.0, 10.0}, 1.0, 0.01);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_GE(clamped[i], -0.5);
    EXPECT_LE(clamped[i], 0.5);
  }
  EXPECT_THROW(joint_step(m, q, v, 0.0, 0.0), std::invalid_argument);
}

TEST(JointStep, NeverNonFiniteAtExactSingularity) {
  const auto m = default_arm();
  std::vector<double> q{0.0, 0.0, 0.0};
  for (int i = 0; i < 200; ++i) {
    q = joint_step(m, q, std::vector<double>{0.5, -0.3}, 0.008, 0.02);
    ASSERT_TRUE(all_finite(q));
  }
}

TEST(ArmModel, Validation) {
  const std::array<double, 1> one{1.0};
  EXPECT_THROW(planar_arm(one), std::invalid_argument);
  EXPECT_THROW(planar_arm(std::array<double, 2>{1.0, 1.0}, JointLimit{1.0, -1.0}), std::invalid_argument);
}

TEST(ArmModel, FromConfig) {
  Config c;
  c.set("dh.0.a", "1.0");
  c.set("dh.1.a", "1.0");
  const auto m = arm_from_config(c);
  ASSERT_EQ(m.joint_count(), 2u);
  const auto p = task_position(m, std::vector<double>{0.0, kPi / 2.0});
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0, 1e-12);
  EXPECT_EQ(arm_from_config(Config{}).joint_count(), 3u);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "neuroadapt/common.hpp"
#include "neuroadapt/stats.hpp"

using namespace neuroadapt;
using namespace neuroadapt::stats;

namespace {

MeasurementTable fixture() { return MeasurementTable::from_rows({{3, 5, 4}, {4, 7, 6}, {6, 9, 8}, {5, 8, 9}}); }

MeasurementTable random_table(std::uint64_t seed, std::size_t s = 8, std::size_t c = 3) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MeasurementTable t;
  t.subjects = s;
  t.conditions = c;
  for (std::size_t i = 0; i < s * c; ++i) t.values.push_back(n(rng) + 0.3 * static_cast<double>(i % c));
  return t;
}

}  // namespace

TEST(RmAnova, AllEqualGivesZero) {
  const auto r = rm_anova_oneway(MeasurementTable::from_rows({{2, 2, 2}, {2, 2, 2}, {2, 2, 2}}), true);
  EXPECT_EQ(r.F, 0.0);
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(*r.p, 1.0);
}

TEST(RmAnova, FixtureMatchesHandComputation) {
  const auto r = rm_anova_oneway(fixture(), true);
  EXPECT_NEAR(r.F, 309.0 / 17.0, 1e-12);
  EXPECT_EQ(r.df_treatment, 2.0);
  EXPECT_EQ(r.df_error, 6.0);
  EXPECT_NEAR(r.ss_conditions, 103.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.ss_error, 17.0 / 6.0, 1e-12);
  EXPECT_NEAR(*r.p, 0.002843171296296296, 1e-12);
  EXPECT_FALSE(rm_anova_oneway(fixture()).p.has_value());
}

TEST(RmAnova, NoiselessShiftIsDegenerateAndSignificant) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  std::vector<std::vector<double>> rows;
  for (int s = 0; s < 10; ++s) {
    const double base = n(rng);
    rows.push_back({base, base, base + 1.0});
  }
  const auto r = rm_anova_oneway(MeasurementTable::from_rows(rows), true);
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(std::isinf(r.F));
  EXPECT_LT(*r.p, 0.05);
}

TEST(RmAnova, SumOfSquaresPartition) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto r = rm_anova_oneway(random_table(seed));
    EXPECT_NEAR(r.ss_total, r.ss_subjects + r.ss_conditions + r.ss_error, 1e-9 * r.ss_total);
    EXPECT_GE(r.ss_error, 0.0);
  }
}

TEST(RmAnova, InvariantToSubjectShiftGlobalShiftAndScale) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto t = random_table(seed);
    const double f = rm_anova_oneway(t).F;
    Rng rng(derive_seed(seed, 2));
    std::normal_distribution<double> n(0.0, 10.0);
    auto shifted = t;
    for (std::size_t s = 0; s < t.subjects; ++s) {
      const double k = n(rng);
      for (std::size_t c = 0; c < t.conditions; ++c) shifted(s, c) += k;
    }
    EXPECT_NEAR(rm_anova_oneway(shifted).F, f, 1e-8 * f);
    auto global = t;
    for (double& v : global.values) v = 3.5 * v - 12.0;
    EXPECT_NEAR(rm_anova_oneway(global).F, f, 1e-8 * f);
  }
}

TEST(RmAnova, Validation) {
  EXPECT_THROW(rm_anova_oneway(MeasurementTable::from_rows({{1, 2, 3}})), std::invalid_argument);
  EXPECT_THROW(rm_anova_oneway(MeasurementTable::from_rows({{1}, {2}})), std::invalid_argument);
  EXPECT_THROW(MeasurementTable::from_rows({{1, 2}, {3}}), std::invalid_argument);
  auto t = fixture();
  t(0, 0) = std::nan("");
  EXPECT_THROW(rm_anova_oneway(t), std::invalid_argument);
  t = fixture();
  t.condition_labels = {"T1"};
  EXPECT_THROW(rm_anova_oneway(t), std::invalid_argument);
}

TEST(PairedT, Examples) {
  const std::vector<double> x{1, 2, 3, 4};
  const auto same = paired_t(x, x, true);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_FALSE(same.degenerate);

  const std::vector<double> plus_one{2, 3, 4, 5};
  const auto constant = paired_t(plus_one, x, true);
  EXPECT_TRUE(constant.degenerate);
  EXPECT_TRUE(std::isinf(constant.t));
  EXPECT_EQ(*constant.p, 0.0);

  const std::vector<double> a{1, 2, 3}, zero{0, 0, 0};
  const auto r = paired_t(a, zero, true);
  EXPECT_NEAR(r.t, 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_EQ(r.df, 2.0);
  EXPECT_NEAR(*r.p, 0.07417990022744854, 1e-10);
  EXPECT_NEAR(paired_t(zero, a).t, -2.0 * std::sqrt(3.0), 1e-12);
}

TEST(PairedT, Validation) {
  const std::vector<double> one{1}, two{1, 2}, three{1, 2, 3};
  EXPECT_THROW(paired_t(one, one), std::invalid_argument);
  EXPECT_THROW(paired_t(two, three), std::invalid_argument);
}

TEST(PairedT, SquareEqualsTwoConditionAnovaF) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto t = random_table(seed, 7, 2);
    std::vector<double> x, y;
    for (std::size_t s = 0; s < t.subjects; ++s) {
      x.push_back(t(s, 0));
      y.push_back(t(s, 1));
    }
    const double tt = paired_t(x, y).t;
    const double f = rm_anova_oneway(t).F;
    EXPECT_NEAR(tt * tt, f, 1e-9 * f);
  }
}

TEST(ResultsCsv, HeaderAndRows) {
  std::vector<ResultRow> rows{{"theta_frontal", rm_anova_oneway(fixture(), true)}, {"no_p", rm_anova_oneway(fixture())}};
  std::ostringstream os;
  write_results_csv(rows, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# neuroadapt-anova v1");
  std::getline(is, line);
  EXPECT_EQ(line, "measure,F,df1,df2,p");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("theta_frontal,18.17647058823529", 0), 0u) << line;
  std::getline(is, line);
  EXPECT_EQ(line.back(), ',');
}

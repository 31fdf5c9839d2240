#pragma once

// One-way repeated-measures ANOVA (no sphericity correction) and paired t.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

namespace neuroadapt::stats {

struct MeasurementTable {
  std::size_t subjects = 0;
  std::size_t conditions = 0;
  std::vector<double> values;  ///< row-major subjects x conditions
  std::vector<std::string> condition_labels;

  static MeasurementTable from_rows(const std::vector<std::vector<double>>& rows) {
    MeasurementTable t;
    t.subjects = rows.size();
    t.conditions = rows.empty() ? 0 : rows.front().size();
    for (const auto& r : rows) {
      if (r.size() != t.conditions) throw std::invalid_argument("measurement table rows must have equal length");
      t.values.insert(t.values.end(), r.begin(), r.end());
    }
    return t;
  }

  double operator()(std::size_t s, std::size_t c) const { return values[s * conditions + c]; }
  double& operator()(std::size_t s, std::size_t c) { return values[s * conditions + c]; }

  void validate() const {
    if (subjects < 2 || conditions < 2) throw std::invalid_argument("need at least 2 subjects and 2 conditions");
    if (values.size() != subjects * conditions) throw std::invalid_argument("incomplete measurement table");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("measurement table has non-finite cells");
    if (!condition_labels.empty() && condition_labels.size() != conditions)
      throw std::invalid_argument("one label per condition required");
  }
};

struct AnovaResult {
  double F = 0.0;
  double df_treatment = 0.0;
  double df_error = 0.0;
  std::optional<double> p;
  double ss_total = 0.0;
  double ss_subjects = 0.0;
  double ss_conditions = 0.0;
  double ss_error = 0.0;
  bool degenerate = false;  ///< MS_error = 0 with MS_conditions > 0: F is infinite
};

/// Upper tail of F(d1, d2) at x.
inline double f_survival(double x, double d1, double d2) {
  if (std::isinf(x)) return 0.0;
  if (x <= 0.0) return 1.0;
  return boost::math::ibeta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x));
}

/// Two-sided p for Student t with `df` degrees of freedom.
inline double t_two_sided(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

inline AnovaResult rm_anova_oneway(const MeasurementTable& t, bool with_p = false) {
  t.validate();
  const double s = static_cast<double>(t.subjects), c = static_cast<double>(t.conditions);
  double grand = 0.0;
  for (double v : t.values) grand += v;
  grand /= s * c;
  std::vector<double> subj(t.subjects, 0.0), cond(t.conditions, 0.0);
  for (std::size_t i = 0; i < t.subjects; ++i)
    for (std::size_t j = 0; j < t.conditions; ++j) {
      subj[i] += t(i, j) / c;
      cond[j] += t(i, j) / s;
    }
  AnovaResult r;
  for (double v : t.values) r.ss_total += (v - grand) * (v - grand);
  for (double m : subj) r.ss_subjects += c * (m - grand) * (m - grand);
  for (double m : cond) r.ss_conditions += s * (m - grand) * (m - grand);
  for (std::size_t i = 0; i < t.subjects; ++i)
    for (std::size_t j = 0; j < t.conditions; ++j) {
      const double e = t(i, j) - subj[i] - cond[j] + grand;
      r.ss_error += e * e;
    }
  r.df_treatment = c - 1.0;
  r.df_error = (c - 1.0) * (s - 1.0);
  const double ms_cond = r.ss_conditions / r.df_treatment;
  const double ms_err = r.ss_error / r.df_error;
  // residual SS below rounding noise of the total counts as exactly zero
  const double tiny = 1e-12 * std::max(r.ss_total, std::numeric_limits<double>::min());
  const bool err_zero = r.ss_error <= tiny;
  const bool cond_zero = r.ss_conditions <= tiny;
  if (err_zero && cond_zero) {
    r.F = 0.0;
  } else if (err_zero) {
    r.F = std::numeric_limits<double>::infinity();
    r.degenerate = true;
  } else {
    r.F = ms_cond / ms_err;
  }
  if (with_p) r.p = r.degenerate ? 0.0 : f_survival(r.F, r.df_treatment, r.df_error);
  return r;
}

struct PairedT {
  double t = 0.0;
  double df = 0.0;
  std::optional<double> p;
  bool degenerate = false;  ///< differences have zero variance but nonzero mean
};

inline PairedT paired_t(std::span<const double> x, std::span<const double> y, bool with_p = false) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("paired_t: need equal lengths >= 2");
  const double n = static_cast<double>(x.size());
  std::vector<double> d(x.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = x[i] - y[i];
    mean += d[i] / n;
  }
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  PairedT r;
  r.df = n - 1.0;
  if (var == 0.0) {
    if (mean != 0.0) {
      r.degenerate = true;
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    }
  } else {
    r.t = mean / std::sqrt(var / n);
  }
  if (with_p) r.p = r.degenerate ? 0.0 : t_two_sided(r.t, r.df);
  return r;
}

/// One row of the tidy results table.
struct ResultRow {
  std::string measure;
  AnovaResult anova;
};

inline void write_results_csv(std::span<const ResultRow> rows, std::ostream& os) {
  os << "# neuroadapt-anova v1\n";
  os << "measure,F,df1,df2,p\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.measure;
    for (double v : {r.anova.F, r.anova.df_treatment, r.anova.df_error}) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    if (r.anova.p) {
      std::snprintf(buf, sizeof buf, ",%.17g", *r.anova.p);
      os << buf;
    } else {
      os << ",";
    }
    os << '\n';
  }
}

}  // namespace neuroadapt::stats

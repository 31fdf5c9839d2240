#pragma once

// Segment analysis of a session: T1/T2/T3 splits of the trials, robot
// feature means, baseline-subtracted band powers, RM-ANOVA over segments,
// sudden-conflict rates and the cost/action series.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "neuroadapt/channel_layout.hpp"
#include "neuroadapt/eeg_pipeline.hpp"
#include "neuroadapt/session.hpp"
#include "neuroadapt/stats.hpp"

namespace neuroadapt::harness {

inline constexpr std::array<const char*, 3> kSegmentLabels{"T1", "T2", "T3"};

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
  std::size_t n = 0;
};

inline MeanSem mean_sem(std::span<const double> xs) {
  MeanSem m;
  m.n = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double var = 0.0;
    for (double x : xs) var += (x - m.mean) * (x - m.mean);
    var /= static_cast<double>(xs.size() - 1);
    m.sem = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return m;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Trailing moving average; entry i averages items max(0, i-w+1)..i.
inline std::vector<double> moving_average(std::span<const double> xs, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(xs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= window) sum -= xs[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

struct TopographyRow {
  std::size_t channel = 0;
  eeg::Band band = eeg::Band::theta;
  std::size_t segment = 0;
  double value = 0.0;
};

struct CostRow {
  std::size_t trial = 0;
  double actor = 0.0, critic = 0.0;
  double actor_ma10 = 0.0, critic_ma10 = 0.0;
};

struct ActionRow {
  std::size_t trial = 0;
  double sigma0_approach = 0.0, sigma1_approach = 0.0;
  double sigma0_leave = 0.0, sigma1_leave = 0.0;
  double reward = 0.0;
};

struct SessionAnalysis {
  SessionMode mode = SessionMode::closed;
  std::array<std::size_t, 3> segment_sizes{};
  std::array<MeanSem, 3> force;         ///< per-trial mean |F| (N)
  std::array<MeanSem, 3> acceleration;  ///< per-trial mean |a| (m/s^2)
  std::array<double, 3> sudden_rate{};  ///< sudden windows / judged windows
  std::array<double, 3> sudden_trial_fraction{};
  std::array<MeanSem, 3> reward;
  /// Baseline-subtracted band power at the frontal-central channel, per trial, averaged per segment.
  std::array<std::array<MeanSem, 3>, eeg::kBandCount> frontal;
  std::vector<TopographyRow> topography;
  std::vector<stats::ResultRow> anova;
  std::vector<CostRow> costs;
  std::vector<ActionRow> actions;

  const MeanSem& frontal_band(eeg::Band b, std::size_t seg) const { return frontal[static_cast<std::size_t>(b)][seg]; }
};

namespace detail {

/// Rank-matched table: subject i is the i-th trial of each segment.
inline stats::MeasurementTable matched_table(const std::array<std::vector<double>, 3>& seg) {
  const std::size_t n = std::min({seg[0].size(), seg[1].size(), seg[2].size()});
  stats::MeasurementTable t;
  t.subjects = n;
  t.conditions = 3;
  t.condition_labels = {kSegmentLabels.begin(), kSegmentLabels.end()};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < 3; ++s) t.values.push_back(seg[s][i]);
  return t;
}

inline void add_anova(SessionAnalysis& a, const std::string& measure, const stats::MeasurementTable& t, bool with_p) {
  if (t.subjects < 2) return;
  a.anova.push_back({measure, stats::rm_anova_oneway(t, with_p)});
}

}  // namespace detail

/// Requires at least 3 trials. `with_p` adds F-distribution p-values.
inline SessionAnalysis analyze_session(const SessionResult& r, bool with_p = true) {
  const std::size_t n = r.trials.size();
  if (n < 3) throw std::invalid_argument("analysis needs at least 3 trials");
  if (r.trial_band_powers.size() != n) throw std::invalid_argument("analysis: one band-power set per trial required");
  SessionAnalysis a;
  a.mode = r.config.mode;
  a.segment_sizes = eeg::segment_sizes(n);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto seg_idx = eeg::split_segments(idx);

  // per-trial robot feature means
  std::vector<double> f_sum(n, 0.0), a_sum(n, 0.0), cnt(n, 0.0);
  for (const auto& s : r.steps) {
    if (s.trial >= n) throw std::invalid_argument("analysis: step row with unknown trial");
    f_sum[s.trial] += s.force;
    a_sum[s.trial] += s.acceleration;
    cnt[s.trial] += 1.0;
  }
  std::array<std::vector<double>, 3> fseg, aseg, rseg;
  for (std::size_t s = 0; s < 3; ++s) {
    std::size_t judged = 0, sudden = 0, sudden_trials = 0;
    for (std::size_t k : seg_idx[s]) {
      fseg[s].push_back(cnt[k] > 0 ? f_sum[k] / cnt[k] : 0.0);
      aseg[s].push_back(cnt[k] > 0 ? a_sum[k] / cnt[k] : 0.0);
      rseg[s].push_back(r.trials[k].reward);
      judged += r.trials[k].windows;
      sudden += r.trials[k].sudden_windows;
      sudden_trials += r.trials[k].sudden_windows > 0;
    }
    a.force[s] = mean_sem(fseg[s]);
    a.acceleration[s] = mean_sem(aseg[s]);
    a.reward[s] = mean_sem(rseg[s]);
    a.sudden_rate[s] = judged ? static_cast<double>(sudden) / static_cast<double>(judged) : 0.0;
    a.sudden_trial_fraction[s] = static_cast<double>(sudden_trials) / static_cast<double>(seg_idx[s].size());
  }
  detail::add_anova(a, "force", detail::matched_table(fseg), with_p);
  detail::add_anova(a, "acceleration", detail::matched_table(aseg), with_p);

  // band powers: per trial, baseline-subtracted
  const std::size_t channels = r.baseline_band_powers.channels();
  const std::size_t fz = eeg::channel_index(eeg::default_layout(), eeg::kFrontalCentral);
  if (fz >= channels) throw std::invalid_argument("analysis: baseline lacks the frontal-central channel");
  std::vector<eeg::BandPowers> sub;
  sub.reserve(n);
  for (const auto& bp : r.trial_band_powers) sub.push_back(eeg::baseline_subtract(bp, r.baseline_band_powers));

  for (eeg::Band b : eeg::kAllBands) {
    const auto bi = static_cast<std::size_t>(b);
    std::array<std::vector<double>, 3> fz_seg;
    stats::MeasurementTable topo;  // channels x segments
    topo.subjects = channels;
    topo.conditions = 3;
    topo.condition_labels = {kSegmentLabels.begin(), kSegmentLabels.end()};
    topo.values.assign(channels * 3, 0.0);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k : seg_idx[s]) {
        fz_seg[s].push_back(sub[k][b][fz]);
        for (std::size_t c = 0; c < channels; ++c) topo(c, s) += sub[k][b][c] / static_cast<double>(seg_idx[s].size());
      }
      a.frontal[bi][s] = mean_sem(fz_seg[s]);
    }
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t s = 0; s < 3; ++s) a.topography.push_back({c, b, s, topo(c, s)});
    const std::string name(to_string(b));
    detail::add_anova(a, name + "_frontal", detail::matched_table(fz_seg), with_p);
    detail::add_anova(a, name + "_channels", topo, with_p);
  }

  std::vector<double> actor, critic;
  for (const auto& t : r.trials)
    if (t.actor_cost && t.critic_cost) {
      actor.push_back(*t.actor_cost);
      critic.push_back(*t.critic_cost);
    }
  if (!actor.empty()) {
    const auto am = moving_average(actor, 10), cm = moving_average(critic, 10);
    std::size_t j = 0;
    for (const auto& t : r.trials)
      if (t.actor_cost && t.critic_cost) {
        a.costs.push_back({t.trial, actor[j], critic[j], am[j], cm[j]});
        ++j;
      }
  }
  for (const auto& t : r.trials)
    a.actions.push_back({t.trial, t.sigma0_approach, t.sigma1_approach, t.sigma0_leave, t.sigma1_leave, t.reward});
  return a;
}

/// Writes segments.csv, frontal_bandpowers.csv, topography.csv, anova.csv,
/// actions.csv and, when costs exist, cost_series.csv.
inline void write_analysis(const SessionAnalysis& a, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw std::runtime_error("cannot create '" + dir.string() + "'");
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    return os;
  };
  {
    auto os = open("segments.csv");
    os << "# neuroadapt-segments v1 mode=" << to_string(a.mode) << "\n";
    os << "segment,trials,force_mean,force_sem,acceleration_mean,acceleration_sem,reward_mean,reward_sem,sudden_rate,"
          "sudden_trial_fraction\n";
    for (std::size_t s = 0; s < 3; ++s)
      os << kSegmentLabels[s] << ',' << a.segment_sizes[s] << ',' << fmt(a.force[s].mean) << ',' << fmt(a.force[s].sem) << ','
         << fmt(a.acceleration[s].mean) << ',' << fmt(a.acceleration[s].sem) << ',' << fmt(a.reward[s].mean) << ','
         << fmt(a.reward[s].sem) << ',' << fmt(a.sudden_rate[s]) << ',' << fmt(a.sudden_trial_fraction[s]) << '\n';
  }
  {
    auto os = open("frontal_bandpowers.csv");
    os << "# neuroadapt-frontal v1 channel=" << eeg::kFrontalCentral << "\n";
    os << "band,segment,trials,mean,sem\n";
    for (eeg::Band b : eeg::kAllBands)
      for (std::size_t s = 0; s < 3; ++s) {
        const auto& m = a.frontal_band(b, s);
        os << to_string(b) << ',' << kSegmentLabels[s] << ',' << m.n << ',' << fmt(m.mean) << ',' << fmt(m.sem) << '\n';
      }
  }
  {
    auto os = open("topography.csv");
    os << "# neuroadapt-topography v1\n";
    os << "channel,band,segment,value\n";
    const auto& layout = eeg::default_layout();
    for (const auto& t : a.topography)
      os << (t.channel < layout.size() ? layout[t.channel].name : std::to_string(t.channel)) << ',' << to_string(t.band)
         << ',' << kSegmentLabels[t.segment] << ',' << fmt(t.value) << '\n';
  }
  {
    auto os = open("anova.csv");
    stats::write_results_csv(a.anova, os);
  }
  {
    auto os = open("actions.csv");
    os << "# neuroadapt-actions v1\n";
    os << "trial,sigma0_approach,sigma1_approach,sigma0_leave,sigma1_leave,reward\n";
    for (const auto& r : a.actions)
      os << r.trial << ',' << fmt(r.sigma0_approach) << ',' << fmt(r.sigma1_approach) << ',' << fmt(r.sigma0_leave) << ','
         << fmt(r.sigma1_leave) << ',' << fmt(r.reward) << '\n';
  }
  if (!a.costs.empty()) {
    auto os = open("cost_series.csv");
    os << "# neuroadapt-cost-series v1\n";
    os << "trial,actor,critic,actor_ma10,critic_ma10\n";
    for (const auto& c : a.costs)
      os << c.trial << ',' << fmt(c.actor) << ',' << fmt(c.critic) << ',' << fmt(c.actor_ma10) << ',' << fmt(c.critic_ma10)
         << '\n';
  }
}

}  // namespace neuroadapt::harness

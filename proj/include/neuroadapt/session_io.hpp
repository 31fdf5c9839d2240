#pragma once

// Session log directory: CSV tables (primary) plus a JSON-lines mirror of the
// per-trial records. Column dictionaries are in docs/log_schemas.md. No wall
// clock or host data is written, so equal seeds give byte-identical files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuroadapt/eeg_io.hpp"
#include "neuroadapt/session.hpp"

namespace neuroadapt::harness {

inline constexpr const char* kStepsFile = "steps.csv";
inline constexpr const char* kEventsFile = "events.csv";
inline constexpr const char* kTrialsFile = "trials.csv";
inline constexpr const char* kCostsFile = "costs.csv";
inline constexpr const char* kBandPowersFile = "eeg_bandpowers.csv";
inline constexpr const char* kBaselineFile = "baseline_bandpowers.csv";
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kManifestFile = "session.json";

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw FormatError("missing log '" + p.string() + "'");
  return is;
}

inline void header(std::ostream& os, const std::string& name, const SessionResult& r) {
  os << "# neuroadapt-" << name << " v1 mode=" << to_string(r.config.mode) << " seed=" << r.config.seed
     << " trials=" << r.config.trials << " dt=" << fmt(r.config.dt) << "\n";
}

inline std::map<std::string, std::string> expect_header(std::istream& is, const std::string& name,
                                                        const std::string& columns) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(name + ": empty file");
  auto f = eeg::detail::header_fields(line, "neuroadapt-" + name);
  if (!std::getline(is, line) || line != columns) throw FormatError(name + ": unexpected column header");
  return f;
}

inline std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return eeg::detail::to_double(s);
}

inline std::vector<std::vector<std::string>> rows(std::istream& is, std::size_t ncols, const std::string& name) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cols = eeg::detail::split_csv(line);
    if (cols.size() != ncols) throw FormatError(name + ": expected " + std::to_string(ncols) + " columns");
    out.push_back(std::move(cols));
  }
  return out;
}

inline Mode parse_mode(const std::string& s) {
  if (s == "approaching") return Mode::approaching;
  if (s == "leaving") return Mode::leaving;
  throw FormatError("unknown mode '" + s + "'");
}

}  // namespace detail

inline const std::string kStepsColumns = "trial,t,force,velocity,acceleration,sigma_min,sigma1,mode";
inline const std::string kEventsColumns = "time,kind,trial,payload";
inline const std::string kTrialsColumns =
    "trial,start,end,sigma0_approach,sigma1_approach,sigma0_leave,sigma1_leave,action_time,switch_time,"
    "anchor_sigma,epoch_start,epoch_end,reward_time,latency,decision_delay,operator_class,classifier_class,"
    "p_none,p_slow,p_sudden,reward,windows,slow_windows,sudden_windows";
inline const std::string kCostsColumns = "trial,actor,critic";
inline const std::string kBandPowersColumns = "trial,band,channel,value";
inline const std::string kBaselineColumns = "band,channel,value";

inline nlohmann::json trial_json(const TrialRecord& t, std::span<const EventRecord> events) {
  nlohmann::json j;
  j["trial"] = t.trial;
  j["start"] = t.start;
  j["end"] = t.end;
  j["approach"] = {{"sigma0", t.sigma0_approach}, {"sigma1", t.sigma1_approach}, {"time", t.action_time}};
  j["leave"] = {{"sigma0", t.sigma0_leave}, {"sigma1", t.sigma1_leave}, {"time", t.switch_time}};
  j["epoch"] = {{"start", t.epoch_start}, {"end", t.epoch_end}, {"anchor_sigma", t.anchor_sigma}};
  j["reward"] = {{"value", t.reward},
                 {"time", t.reward_time},
                 {"latency", t.latency},
                 {"class", to_string(t.classifier_class)},
                 {"operator_class", to_string(t.operator_class)},
                 {"probabilities", t.probabilities}};
  j["windows"] = {{"judged", t.windows}, {"slow", t.slow_windows}, {"sudden", t.sudden_windows}};
  j["decision_delay"] = t.decision_delay ? nlohmann::json(*t.decision_delay) : nlohmann::json();
  if (t.actor_cost) j["costs"] = {{"actor", *t.actor_cost}, {"critic", *t.critic_cost}};
  auto& ev = j["events"] = nlohmann::json::array();
  for (const auto& e : events)
    if (e.trial == t.trial) ev.push_back({{"time", e.time}, {"kind", to_string(e.kind)}, {"payload", e.payload}});
  return j;
}

inline bool has_costs(const SessionResult& r) {
  return r.config.mode == SessionMode::closed && !r.config.fixed_sigma1;
}

/// Writes every log file of `r` into `dir` (created if needed).
inline void write_session_logs(const SessionResult& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");

  {
    auto os = detail::open_out(dir / kStepsFile);
    detail::header(os, "steps", r);
    os << kStepsColumns << '\n';
    for (const auto& s : r.steps)
      os << s.trial << ',' << fmt(s.t) << ',' << fmt(s.force) << ',' << fmt(s.velocity) << ',' << fmt(s.acceleration) << ','
         << fmt(s.sigma_min) << ',' << fmt(s.sigma1) << ',' << to_string(s.mode) << '\n';
  }
  {
    auto os = detail::open_out(dir / kEventsFile);
    detail::header(os, "events", r);
    os << kEventsColumns << '\n';
    for (const auto& e : r.events) os << fmt(e.time) << ',' << to_string(e.kind) << ',' << e.trial << ',' << e.payload << '\n';
  }
  {
    auto os = detail::open_out(dir / kTrialsFile);
    detail::header(os, "trials", r);
    os << kTrialsColumns << '\n';
    for (const auto& t : r.trials) {
      os << t.trial;
      for (double v : {t.start, t.end, t.sigma0_approach, t.sigma1_approach, t.sigma0_leave, t.sigma1_leave, t.action_time,
                       t.switch_time, t.anchor_sigma, t.epoch_start, t.epoch_end, t.reward_time, t.latency})
        os << ',' << fmt(v);
      os << ',' << detail::opt(t.decision_delay) << ',' << to_string(t.operator_class) << ','
         << to_string(t.classifier_class);
      for (double p : t.probabilities) os << ',' << fmt(p);
      os << ',' << fmt(t.reward) << ',' << t.windows << ',' << t.slow_windows << ',' << t.sudden_windows << '\n';
    }
  }
  if (has_costs(r)) {
    auto os = detail::open_out(dir / kCostsFile);
    detail::header(os, "costs", r);
    os << kCostsColumns << '\n';
    for (const auto& t : r.trials) {
      if (!t.actor_cost || !t.critic_cost) throw std::logic_error("closed-loop trial without cost entry");
      os << t.trial << ',' << fmt(*t.actor_cost) << ',' << fmt(*t.critic_cost) << '\n';
    }
  }
  {
    auto os = detail::open_out(dir / kBandPowersFile);
    detail::header(os, "bandpowers", r);
    os << kBandPowersColumns << '\n';
    for (std::size_t k = 0; k < r.trial_band_powers.size(); ++k)
      for (eeg::Band b : eeg::kAllBands)
        for (std::size_t c = 0; c < r.trial_band_powers[k].channels(); ++c)
          os << k << ',' << to_string(b) << ',' << c << ',' << fmt(r.trial_band_powers[k][b][c]) << '\n';
  }
  {
    auto os = detail::open_out(dir / kBaselineFile);
    detail::header(os, "baseline", r);
    os << kBaselineColumns << '\n';
    for (eeg::Band b : eeg::kAllBands)
      for (std::size_t c = 0; c < r.baseline_band_powers.channels(); ++c)
        os << to_string(b) << ',' << c << ',' << fmt(r.baseline_band_powers[b][c]) << '\n';
  }
  {
    auto os = detail::open_out(dir / kRecordsFile);
    for (const auto& t : r.trials) os << trial_json(t, r.events).dump() << '\n';
  }
  {
    const auto& c = r.config;
    nlohmann::json m;
    m["format"] = "neuroadapt-session";
    m["version"] = 1;
    m["mode"] = to_string(c.mode);
    m["seed"] = c.seed;
    m["trials"] = c.trials;
    m["dt"] = c.dt;
    m["latency"] = {c.latency_min, c.latency_max};
    m["fixed_sigma1"] = c.fixed_sigma1 ? nlohmann::json(*c.fixed_sigma1) : nlohmann::json();
    m["agent"] = {{"gamma", c.agent.gamma},           {"tau", c.agent.tau},
                  {"actor_lr", c.agent.actor_lr},     {"critic_lr", c.agent.critic_lr},
                  {"batch_size", c.agent.batch_size}, {"buffer_capacity", c.agent.buffer_capacity},
                  {"noise_std", c.agent.noise_std},   {"noise_decay", c.agent.noise_decay},
                  {"reward_scale", c.agent.reward_scale}};
    std::vector<std::string> files{kStepsFile, kEventsFile, kTrialsFile, kBandPowersFile, kBaselineFile, kRecordsFile};
    if (has_costs(r)) files.insert(files.begin() + 3, kCostsFile);
    m["files"] = files;
    auto os = detail::open_out(dir / kManifestFile);
    os << m.dump(2) << '\n';
  }
}

/// Output root: $NEUROADAPT_OUT when set and non-empty, else the configured directory.
inline std::filesystem::path resolve_out_dir(const SessionConfig& cfg) {
  if (const char* env = std::getenv("NEUROADAPT_OUT"); env && *env) return env;
  return cfg.out_dir;
}

/// Simulates one session and writes its logs into `dir`.
inline void run_session_to(const SessionConfig& cfg, const std::filesystem::path& dir,
                           const clf::ClassifierModel* classifier = nullptr) {
  const auto r = simulate_session(cfg, classifier);
  for (const auto& t : r.trials) {
    for (const auto& c : {t.actor_cost, t.critic_cost})
      if (c && !std::isfinite(*c)) throw DivergenceError("non-finite training cost at trial " + std::to_string(t.trial));
    if (!std::isfinite(t.sigma1_approach) || !std::isfinite(t.sigma1_leave))
      throw DivergenceError("non-finite action at trial " + std::to_string(t.trial));
  }
  write_session_logs(r, dir);
}

/// Simulates and persists one session under resolve_out_dir(cfg); returns that directory.
inline std::filesystem::path run_session(const SessionConfig& cfg, const clf::ClassifierModel* classifier = nullptr) {
  const auto dir = resolve_out_dir(cfg);
  run_session_to(cfg, dir, classifier);
  return dir;
}

// ----------------------------------------------------------------- reading

/// True when `dir` holds at least the trials table.
inline bool has_session_logs(const std::filesystem::path& dir) {
  return std::filesystem::is_regular_file(dir / kTrialsFile);
}

/// Rebuilds the parts of a SessionResult the analysis needs (config mode,
/// seed and trial count; trials; steps; band powers; costs) from a log directory.
inline SessionResult read_session_logs(const std::filesystem::path& dir) {
  if (!has_session_logs(dir)) throw FormatError("no logs in '" + dir.string() + "'");
  SessionResult r;
  {
    auto is = detail::open_in(dir / kTrialsFile);
    auto h = detail::expect_header(is, "trials", kTrialsColumns);
    r.config.mode = parse_session_mode(h.at("mode"));
    r.config.seed = std::stoull(h.at("seed"));
    r.config.trials = eeg::detail::to_index(h.at("trials"));
    r.config.dt = eeg::detail::to_double(h.at("dt"));
    for (const auto& c : detail::rows(is, 24, "trials")) {
      using eeg::detail::to_double;
      TrialRecord t;
      t.trial = eeg::detail::to_index(c[0]);
      double* fields[] = {&t.start,       &t.end,        &t.sigma0_approach, &t.sigma1_approach, &t.sigma0_leave,
                          &t.sigma1_leave, &t.action_time, &t.switch_time,    &t.anchor_sigma,    &t.epoch_start,
                          &t.epoch_end,   &t.reward_time, &t.latency};
      for (std::size_t i = 0; i < 13; ++i) *fields[i] = to_double(c[1 + i]);
      t.decision_delay = detail::parse_opt(c[14]);
      t.operator_class = parse_conflict_class(c[15]);
      t.classifier_class = parse_conflict_class(c[16]);
      for (std::size_t i = 0; i < 3; ++i) t.probabilities[i] = to_double(c[17 + i]);
      t.reward = to_double(c[20]);
      t.windows = eeg::detail::to_index(c[21]);
      t.slow_windows = eeg::detail::to_index(c[22]);
      t.sudden_windows = eeg::detail::to_index(c[23]);
      r.trials.push_back(t);
    }
  }
  if (r.trials.size() != r.config.trials) throw FormatError("trials: row count differs from header");
  {
    auto is = detail::open_in(dir / kStepsFile);
    detail::expect_header(is, "steps", kStepsColumns);
    for (const auto& c : detail::rows(is, 8, "steps")) {
      using eeg::detail::to_double;
      r.steps.push_back({eeg::detail::to_index(c[0]), to_double(c[1]), to_double(c[2]), to_double(c[3]), to_double(c[4]),
                         to_double(c[5]), to_double(c[6]), detail::parse_mode(c[7])});
    }
  }
  {
    auto is = detail::open_in(dir / kEventsFile);
    detail::expect_header(is, "events", kEventsColumns);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      // payload is last and never contains commas
      auto c = eeg::detail::split_csv(line);
      if (c.size() != 4) throw FormatError("events: expected 4 columns");
      r.events.push_back({eeg::detail::to_double(c[0]), parse_event_kind(c[1]), eeg::detail::to_index(c[2]), c[3]});
    }
  }
  if (std::filesystem::exists(dir / kCostsFile)) {
    auto is = detail::open_in(dir / kCostsFile);
    detail::expect_header(is, "costs", kCostsColumns);
    for (const auto& c : detail::rows(is, 3, "costs")) {
      const auto k = eeg::detail::to_index(c[0]);
      if (k >= r.trials.size()) throw FormatError("costs: trial index out of range");
      r.trials[k].actor_cost = eeg::detail::to_double(c[1]);
      r.trials[k].critic_cost = eeg::detail::to_double(c[2]);
    }
  }
  auto read_bands = [](std::istream& is, std::vector<eeg::BandPowers>& per_trial, bool with_trial, std::size_t n_trials) {
    const std::size_t off = with_trial ? 1 : 0;
    per_trial.assign(with_trial ? n_trials : 1, {});
    for (const auto& c : detail::rows(is, 3 + off, "band powers")) {
      const std::size_t k = with_trial ? eeg::detail::to_index(c[0]) : 0;
      if (k >= per_trial.size()) throw FormatError("band powers: trial index out of range");
      auto& v = per_trial[k][eeg::parse_band(c[off])];
      const auto ch = eeg::detail::to_index(c[off + 1]);
      if (ch != v.size()) throw FormatError("band powers: channels out of order");
      v.push_back(eeg::detail::to_double(c[off + 2]));
    }
  };
  {
    auto is = detail::open_in(dir / kBandPowersFile);
    detail::expect_header(is, "bandpowers", kBandPowersColumns);
    read_bands(is, r.trial_band_powers, true, r.trials.size());
  }
  {
    auto is = detail::open_in(dir / kBaselineFile);
    detail::expect_header(is, "baseline", kBaselineColumns);
    std::vector<eeg::BandPowers> one;
    read_bands(is, one, false, 0);
    r.baseline_band_powers = one.front();
  }
  return r;
}

}  // namespace neuroadapt::harness

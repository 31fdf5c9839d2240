// neuroadapt: run, analyze and check simulated neuroadaptive sessions.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "neuroadapt/analysis.hpp"
#include "neuroadapt/checks.hpp"
#include "neuroadapt/conflict_classifier.hpp"
#include "neuroadapt/session.hpp"
#include "neuroadapt/session_io.hpp"

using namespace neuroadapt;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

Config load_config(const std::string& path) { return path.empty() ? Config{} : Config::load(path); }

int cmd_run(const CommonOpts& o, const std::optional<std::string>& mode, const std::optional<std::size_t>& trials,
            bool pipelined) {
  auto cfg = harness::session_config_from(load_config(o.config));
  if (mode) cfg.mode = harness::parse_session_mode(*mode);
  if (trials) cfg.trials = *trials;
  if (o.seed) cfg.seed = *o.seed;
  if (pipelined) cfg.pipelined = true;
  cfg.validate();
  const fs::path dir = o.out.empty() ? harness::resolve_out_dir(cfg) : fs::path(o.out);
  harness::run_session_to(cfg, dir);
  std::printf("wrote %s session (%zu trials, seed %llu) to %s\n", std::string(to_string(cfg.mode)).c_str(), cfg.trials,
              static_cast<unsigned long long>(cfg.seed), dir.string().c_str());
  return 0;
}

int cmd_analyze(const std::string& dir, const std::string& out, bool no_p) {
  if (!fs::is_directory(dir) || !harness::has_session_logs(dir)) {
    std::fprintf(stderr, "error: no logs in '%s'\n", dir.c_str());
    return 1;
  }
  const auto r = harness::read_session_logs(dir);
  const auto a = harness::analyze_session(r, !no_p);
  const fs::path dest = out.empty() ? fs::path(dir) / "analysis" : fs::path(out);
  harness::write_analysis(a, dest);
  std::printf("%s session, %zu trials (segments %zu/%zu/%zu)\n", std::string(to_string(a.mode)).c_str(), r.trials.size(),
              a.segment_sizes[0], a.segment_sizes[1], a.segment_sizes[2]);
  std::printf("%-4s %14s %14s %12s %16s\n", "seg", "|F| N", "|a| m/s^2", "sudden rate", "Fz theta uV^2");
  for (std::size_t s = 0; s < 3; ++s)
    std::printf("%-4s %7.3f+-%-5.3f %7.3f+-%-5.3f %12.4f %9.3f+-%-5.3f\n", harness::kSegmentLabels[s], a.force[s].mean,
                a.force[s].sem, a.acceleration[s].mean, a.acceleration[s].sem, a.sudden_rate[s],
                a.frontal_band(eeg::Band::theta, s).mean, a.frontal_band(eeg::Band::theta, s).sem);
  for (const auto& row : a.anova)
    std::printf("anova %-16s F(%g, %g) = %.4g%s\n", row.measure.c_str(), row.anova.df_treatment, row.anova.df_error, row.anova.F,
                row.anova.p ? checks::format(", p = %.3g", *row.anova.p).c_str() : "");
  std::printf("tables written to %s\n", dest.string().c_str());
  return 0;
}

int cmd_synth(const CommonOpts& o, std::size_t per_class) {
  if (o.out.empty()) throw std::invalid_argument("synth-data needs --out");
  auto cfg = harness::session_config_from(load_config(o.config));
  const auto seed = o.seed.value_or(1);
  const auto ds = clf::make_synthetic_dataset(cfg.eeg, {per_class, std::max<std::size_t>(per_class / 4, 1), per_class / 4}, seed);
  clf::export_dataset(ds, o.out);
  std::printf("wrote %zu epochs to %s\n", ds.size(), o.out.c_str());
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& data) {
  auto cfg = harness::session_config_from(load_config(o.config));
  const auto seed = o.seed.value_or(1);
  const auto ds = data.empty() ? clf::make_synthetic_dataset(cfg.eeg, {200, 50, 50}, seed) : clf::import_dataset(data);
  const auto res = clf::train(ds, seed);
  std::printf("best epoch %zu; validation accuracy %.3f", res.best_epoch, clf::accuracy(res.model, ds, clf::Split::validation));
  if (ds.class_counts(clf::Split::test)[0] > 0) std::printf("; test accuracy %.3f", clf::accuracy(res.model, ds, clf::Split::test));
  std::printf("\n");
  if (!o.out.empty()) {
    clf::save_model_file(res.model, o.out);
    std::printf("model written to %s\n", o.out.c_str());
  }
  return 0;
}

int cmd_check(const CommonOpts& o, bool all, const std::vector<int>& only) {
  std::vector<int> ids = only;
  if (ids.empty()) {
    if (all)
      for (int i = 1; i <= 12; ++i) ids.push_back(i);
    else
      ids.assign(checks::kFastChecks.begin(), checks::kFastChecks.end());
  }
  const fs::path scratch = o.out.empty() ? fs::temp_directory_path() / "neuroadapt-check" : fs::path(o.out);
  checks::SessionSuite suite(harness::session_config_from(load_config(o.config)));
  std::size_t failed = 0;
  checks::run_checks(ids, scratch, suite, [&](const checks::CheckResult& r) {
    failed += !r.pass;
    std::printf("[%s] %2d %-24s %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
  });
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated neuroadaptive physical human-robot collaboration"};
  app.require_subcommand(1);
  CommonOpts o;
  auto common = [&](CLI::App* sc) {
    sc->add_option("--seed", o.seed, "random seed");
    sc->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
    sc->add_option("--out", o.out, "output path");
  };

  auto* run = app.add_subcommand("run", "simulate a session and write its logs");
  common(run);
  std::optional<std::string> mode;
  std::optional<std::size_t> trials;
  bool pipelined = false;
  run->add_option("--mode", mode, "open or closed")->check(CLI::IsMember({"open", "closed"}));
  run->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
  run->add_flag("--pipelined", pipelined, "overlap EEG synthesis with simulation");

  auto* analyze = app.add_subcommand("analyze", "segment analysis of a session log directory");
  std::string log_dir, analysis_out;
  bool no_p = false;
  analyze->add_option("dir", log_dir, "session log directory")->required();
  analyze->add_option("--out", analysis_out, "directory for analysis tables (default <dir>/analysis)");
  analyze->add_flag("--no-p", no_p, "skip p-values");

  auto* synth = app.add_subcommand("synth-data", "write a balanced synthetic EEG epoch dataset");
  common(synth);
  std::size_t per_class = 200;
  synth->add_option("--per-class", per_class, "EEG epochs per class in the training split")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train-classifier", "train the conflict classifier");
  common(train);
  std::string data;
  train->add_option("--data", data, "dataset directory from synth-data (default: synthesize)");

  auto* check = app.add_subcommand("check", "run the invariant and acceptance checks");
  common(check);
  bool all = false;
  std::vector<int> only;
  check->add_flag("--all", all, "include the slow session-level checks");
  check->add_option("--only", only, "check ids to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(o, mode, trials, pipelined);
    if (analyze->parsed()) return cmd_analyze(log_dir, analysis_out, no_p);
    if (synth->parsed()) return cmd_synth(o, per_class);
    if (train->parsed()) return cmd_train(o, data);
    if (check->parsed()) return cmd_check(o, all, only);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

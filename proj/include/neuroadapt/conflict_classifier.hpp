#pragma once

// Dense surrogate for the conflict decoder: spectral/temporal features of a
// 1.2 s, 1000 Hz epoch -> (none, slow, sudden) -> reward term.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuroadapt/binary_io.hpp"
#include "neuroadapt/common.hpp"
#include "neuroadapt/eeg_io.hpp"
#include "neuroadapt/eeg_pipeline.hpp"
#include "neuroadapt/neuralnet.hpp"
#include "neuroadapt/operator_sim.hpp"

namespace neuroadapt::clf {

/// Geometry and windows of the real-time feature front end.
struct FeatureSpec {
  std::size_t channels = eeg::kChannels;
  double sample_rate = 1000.0;
  std::size_t samples = 1200;
  double power_window_start = 0.0;  ///< s after the event
  double power_window_end = 0.6;
  std::size_t psd_nfft = 1024;
  double min_window_start = 0.15;
  double min_window_end = 0.35;

  static constexpr std::size_t kPerChannel = 3;
  std::size_t feature_count() const { return channels * kPerChannel; }
  bool operator==(const FeatureSpec&) const = default;
};

/// Raw (unstandardized) features, per channel: log1p(theta power),
/// log1p(delta power), minimum amplitude in the deflection window. Band powers
/// come from the causal band-pass; the minimum is read from the demeaned raw
/// trace, where the slow deflection survives (the 2 Hz high-pass eats most of it).
inline std::vector<double> featurize(const eeg::EEGEpoch& epoch, const FeatureSpec& spec = {}) {
  if (epoch.channels() != spec.channels || epoch.samples() != spec.samples ||
      std::abs(epoch.sample_rate - spec.sample_rate) > 1e-9)
    throw ShapeError("featurize: expected " + std::to_string(spec.channels) + " x " + std::to_string(spec.samples) +
                     " epoch at " + std::to_string(spec.sample_rate) + " Hz");
  const auto idx = [&](double t) {
    return std::min(spec.samples, static_cast<std::size_t>(std::llround(t * spec.sample_rate)));
  };
  const std::size_t p0 = idx(spec.power_window_start), p1 = idx(spec.power_window_end);
  const std::size_t m0 = idx(spec.min_window_start), m1 = idx(spec.min_window_end);
  const eeg::BandEdges edges;
  std::vector<double> f(spec.feature_count(), 0.0);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    const auto row = epoch.data.row(c);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    std::vector<double> x(row.begin(), row.end());
    for (double& v : x) v -= mean;
    const auto y = eeg::bandpass_2_50(x, spec.sample_rate, false);
    const std::span<const double> win(y.data() + p0, p1 - p0);
    const auto psd = eeg::welch_psd(win, spec.sample_rate, win.size(), 0.0, std::max(spec.psd_nfft, win.size()));
    const auto prow = psd.power.row(0);
    const double theta = eeg::integrate_band(psd.frequencies, prow, edges[eeg::Band::theta][0], edges[eeg::Band::theta][1]);
    const double delta = eeg::integrate_band(psd.frequencies, prow, edges[eeg::Band::delta][0], edges[eeg::Band::delta][1]);
    double mn = 0.0;
    if (m1 > m0) mn = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(m0), x.begin() + static_cast<std::ptrdiff_t>(m1));
    f[c * FeatureSpec::kPerChannel + 0] = std::log1p(theta);
    f[c * FeatureSpec::kPerChannel + 1] = std::log1p(delta);
    f[c * FeatureSpec::kPerChannel + 2] = mn;
  }
  return f;
}

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

struct LabeledEpochSet {
  std::vector<eeg::EEGEpoch> epochs;
  std::vector<ConflictClass> labels;
  std::vector<Split> splits;
  std::vector<std::uint64_t> seeds;  ///< generator seed per epoch (0 when unknown)

  std::size_t size() const { return epochs.size(); }

  void validate() const {
    if (labels.size() != epochs.size() || splits.size() != epochs.size())
      throw std::invalid_argument("dataset: epochs, labels and splits must have equal length");
  }

  std::array<std::size_t, kConflictClassCount> class_counts(Split s) const {
    std::array<std::size_t, kConflictClassCount> n{};
    for (std::size_t i = 0; i < size(); ++i)
      if (splits[i] == s) ++n[static_cast<std::size_t>(labels[i])];
    return n;
  }
};

/// Balanced synthetic set: `per_class[split]` epochs of each class per split,
/// classes interleaved.
inline LabeledEpochSet make_synthetic_dataset(const op::SyntheticEEGConfig& cfg,
                                              std::array<std::size_t, 3> per_class, std::uint64_t seed) {
  LabeledEpochSet ds;
  std::uint64_t k = 0;
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < per_class[s]; ++i)
      for (std::size_t c = 0; c < kConflictClassCount; ++c) {
        const auto es = derive_seed(seed, k++);
        ds.epochs.push_back(op::synth_eeg_epoch(cfg, conflict_class_from_index(static_cast<int>(c)), es));
        ds.labels.push_back(conflict_class_from_index(static_cast<int>(c)));
        ds.splits.push_back(static_cast<Split>(s));
        ds.seeds.push_back(es);
      }
  return ds;
}

// Dataset directory: manifest.jsonl (one record per epoch: file, label, seed,
// split) plus epochs/<index>.naep in the binary epoch format.

inline void export_dataset(const LabeledEpochSet& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir / "epochs");
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write dataset manifest in " + dir.string());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.naep", i);
    eeg::save_epoch_file(ds.epochs[i], (dir / "epochs" / name).string());
    nlohmann::json rec{{"file", std::string("epochs/") + name},
                       {"label", std::string(to_string(ds.labels[i]))},
                       {"seed", ds.seeds.empty() ? 0 : ds.seeds[i]},
                       {"split", std::string(to_string(ds.splits[i]))}};
    manifest << rec.dump() << '\n';
  }
}

inline LabeledEpochSet import_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("no manifest.jsonl in " + dir.string());
  LabeledEpochSet ds;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    ds.epochs.push_back(eeg::load_epoch_file((dir / rec.at("file").get<std::string>()).string()));
    ds.labels.push_back(parse_conflict_class(rec.at("label").get<std::string>()));
    ds.splits.push_back(parse_split(rec.at("split").get<std::string>()));
    ds.seeds.push_back(rec.value("seed", std::uint64_t{0}));
  }
  return ds;
}

struct ClassifierModel {
  FeatureSpec features;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  nn::DenseNet net;

  void validate() const {
    if (net.output_dim() != kConflictClassCount || net.layers().back().activation != nn::Activation::softmax)
      throw ShapeError("classifier net must end in a 3-way softmax");
    if (net.input_dim() != features.feature_count() || feature_mean.size() != features.feature_count() ||
        feature_scale.size() != features.feature_count())
      throw ShapeError("classifier feature width mismatch");
  }

  std::vector<double> standardize(std::vector<double> raw) const {
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = (raw[i] - feature_mean[i]) / feature_scale[i];
    return raw;
  }
};

struct TrainConfig {
  std::vector<std::size_t> hidden{64, 64};
  double learning_rate = 1e-3;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 20;  ///< epochs without validation improvement before stopping
  double balance_tolerance = 0.10;
};

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  ClassifierModel model;
  std::vector<EpochReport> history;
  std::size_t best_epoch = 0;
};

/// argmax with ties resolved toward the safer label: sudden > slow > none.
inline ConflictClass decide_class(std::span<const double> probabilities) {
  if (probabilities.size() != kConflictClassCount) throw ShapeError("decide_class: need 3 probabilities");
  std::size_t best = 2;
  for (std::size_t c = 2; c-- > 0;)
    if (probabilities[c] > probabilities[best]) best = c;
  return conflict_class_from_index(static_cast<int>(best));
}

namespace detail {

struct FeatureMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
};

inline double cross_entropy(std::span<const double> probs, std::size_t label) {
  return -std::log(std::max(probs[label], 1e-300));
}

inline std::pair<double, double> evaluate(const nn::DenseNet& net, const FeatureMatrix& m) {
  if (m.rows.empty()) return {0.0, 0.0};
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto p = nn::forward(net, m.rows[i]);
    loss += cross_entropy(p, m.labels[i]);
    if (static_cast<std::size_t>(decide_class(p)) == m.labels[i]) ++correct;
  }
  const double n = static_cast<double>(m.rows.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace detail

/// Standardizes features on the training split and fits a softmax MLP by
/// minibatch cross-entropy with Adam, keeping the weights of the best
/// validation epoch. Deterministic per seed.
inline TrainResult train(const LabeledEpochSet& dataset, std::uint64_t seed, const TrainConfig& cfg = {},
                         const FeatureSpec& spec = {}) {
  dataset.validate();
  for (Split s : {Split::train, Split::validation}) {
    const auto n = dataset.class_counts(s);
    for (std::size_t c = 0; c < kConflictClassCount; ++c)
      if (n[c] == 0)
        throw std::invalid_argument("train: class '" + std::string(to_string(conflict_class_from_index(static_cast<int>(c)))) +
                                    "' missing from " + std::string(to_string(s)) + " split");
  }
  {
    const auto n = dataset.class_counts(Split::train);
    const double mean = static_cast<double>(n[0] + n[1] + n[2]) / 3.0;
    for (auto k : n)
      if (std::abs(static_cast<double>(k) - mean) > cfg.balance_tolerance * mean)
        throw std::invalid_argument("train: training classes are not balanced within tolerance");
  }

  TrainResult result;
  auto& model = result.model;
  model.features = spec;
  detail::FeatureMatrix tr, va;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.splits[i] == Split::test) continue;
    auto& dst = dataset.splits[i] == Split::train ? tr : va;
    dst.rows.push_back(featurize(dataset.epochs[i], spec));
    dst.labels.push_back(static_cast<std::size_t>(dataset.labels[i]));
  }
  const std::size_t dim = spec.feature_count();
  model.feature_mean.assign(dim, 0.0);
  model.feature_scale.assign(dim, 0.0);
  for (const auto& r : tr.rows)
    for (std::size_t j = 0; j < dim; ++j) model.feature_mean[j] += r[j];
  for (double& m : model.feature_mean) m /= static_cast<double>(tr.rows.size());
  for (const auto& r : tr.rows)
    for (std::size_t j = 0; j < dim; ++j) model.feature_scale[j] += (r[j] - model.feature_mean[j]) * (r[j] - model.feature_mean[j]);
  for (double& s : model.feature_scale) s = std::max(std::sqrt(s / static_cast<double>(tr.rows.size())), 1e-9);
  for (auto& r : tr.rows) r = model.standardize(std::move(r));
  for (auto& r : va.rows) r = model.standardize(std::move(r));

  std::vector<nn::LayerSpec> layers;
  for (auto h : cfg.hidden) layers.push_back({h, nn::Activation::relu});
  layers.push_back({kConflictClassCount, nn::Activation::softmax});
  model.net = nn::DenseNet::create(dim, layers, derive_seed(seed, 1));
  auto opt = nn::OptimizerState::for_net(model.net, cfg.learning_rate);

  Rng rng(derive_seed(seed, 2));
  std::vector<std::size_t> order(tr.rows.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = -1.0;
  nn::DenseNet best_net = model.net;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      auto grads = nn::NetGradients::zeros_like(model.net);
      for (std::size_t b = start; b < end; ++b) {
        const auto& x = tr.rows[order[b]];
        const auto trace = nn::forward_trace(model.net, x);
        std::vector<double> up(kConflictClassCount, 0.0);
        const auto label = tr.labels[order[b]];
        up[label] = -1.0 / std::max(trace.output()[label], 1e-300);
        grads.add(nn::backward(model.net, trace, up).params);
      }
      grads.scale(1.0 / static_cast<double>(end - start));
      nn::opt_step(model.net, grads, opt);
    }
    const auto [loss, acc] = detail::evaluate(model.net, tr);
    const auto [vloss, vacc] = detail::evaluate(model.net, va);
    (void)vloss;
    result.history.push_back({epoch, loss, acc, vacc});
    if (vacc > best_val) {
      best_val = vacc;
      best_net = model.net;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.net = std::move(best_net);
  model.validate();
  return result;
}

struct Classification {
  ConflictClass conflict = ConflictClass::none;
  std::array<double, kConflictClassCount> probabilities{};
};

inline Classification classify(const ClassifierModel& model, const eeg::EEGEpoch& epoch) {
  const auto x = model.standardize(featurize(epoch, model.features));
  const auto p = nn::forward(model.net, x);
  Classification c;
  std::copy(p.begin(), p.end(), c.probabilities.begin());
  c.conflict = decide_class(p);
  return c;
}

/// Fraction of `split` epochs classified correctly.
inline double accuracy(const ClassifierModel& model, const LabeledEpochSet& ds, Split split) {
  std::size_t n = 0, ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.splits[i] != split) continue;
    ++n;
    if (classify(model, ds.epochs[i]).conflict == ds.labels[i]) ++ok;
  }
  return n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
}

// ------------------------------------------------------------------ reward

struct RewardConfig {
  double r_prime = 0.0;
  /// Indexed by ConflictClass (none, slow, sudden).
  std::array<double, kConflictClassCount> class_rewards{100.0, 50.0, -100.0};
};

/// r = r' + r_class.
inline double compute_reward(ConflictClass c, const RewardConfig& cfg = {}) {
  const auto i = static_cast<std::size_t>(c);
  if (i >= kConflictClassCount) throw std::invalid_argument("compute_reward: unknown class");
  return cfg.r_prime + cfg.class_rewards[i];
}

// ----------------------------------------------------------- persistence

// "NACL" magic, u32 version, feature spec fields, standardization vectors,
// then the embedded network in the NANN format.

inline void save_model(const ClassifierModel& m, std::ostream& os) {
  m.validate();
  io::write_magic(os, "NACL");
  io::write_u32(os, 1);
  const auto& f = m.features;
  io::write_u32(os, static_cast<std::uint32_t>(f.channels));
  io::write_f64(os, f.sample_rate);
  io::write_u32(os, static_cast<std::uint32_t>(f.samples));
  io::write_f64(os, f.power_window_start);
  io::write_f64(os, f.power_window_end);
  io::write_u32(os, static_cast<std::uint32_t>(f.psd_nfft));
  io::write_f64(os, f.min_window_start);
  io::write_f64(os, f.min_window_end);
  for (double v : m.feature_mean) io::write_f64(os, v);
  for (double v : m.feature_scale) io::write_f64(os, v);
  nn::save(m.net, os);
}

inline ClassifierModel load_model(std::istream& is) {
  io::expect_magic(is, "NACL");
  if (io::read_u32(is) != 1) throw FormatError("unsupported classifier format version");
  ClassifierModel m;
  auto& f = m.features;
  f.channels = io::read_u32(is);
  f.sample_rate = io::read_f64(is);
  f.samples = io::read_u32(is);
  f.power_window_start = io::read_f64(is);
  f.power_window_end = io::read_f64(is);
  f.psd_nfft = io::read_u32(is);
  f.min_window_start = io::read_f64(is);
  f.min_window_end = io::read_f64(is);
  if (f.channels == 0 || f.channels > 1024) throw FormatError("implausible channel count");
  m.feature_mean.resize(f.feature_count());
  m.feature_scale.resize(f.feature_count());
  for (double& v : m.feature_mean) v = io::read_f64(is);
  for (double& v : m.feature_scale) v = io::read_f64(is);
  m.net = nn::load(is);
  m.validate();
  return m;
}

inline void save_model_file(const ClassifierModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  save_model(m, os);
}

inline ClassifierModel load_model_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + path + "'");
  return load_model(is);
}

}  // namespace neuroadapt::clf

#pragma once

// EEG signal path: 2-50 Hz Butterworth band-pass, 1000->250 Hz decimation,
// event epoching, Welch PSD, band powers, baseline normalization and
// time-segment splitting.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "neuroadapt/common.hpp"
#include "neuroadapt/fft.hpp"
#include "neuroadapt/neuralnet.hpp"

namespace neuroadapt::eeg {

using nn::Tensor2D;

inline constexpr std::size_t kChannels = 32;

/// Channels x samples window of EEG in microvolts.
struct EEGEpoch {
  Tensor2D data;
  double sample_rate = 1000.0;
  std::string event_tag;
  double event_time = 0.0;

  std::size_t channels() const { return data.rows; }
  std::size_t samples() const { return data.cols; }
  bool operator==(const EEGEpoch&) const = default;
};

// ---------------------------------------------------------------- filtering

struct Biquad {
  double b0, b1, b2, a1, a2;  // a0 normalized to 1
};

namespace detail {

enum class BiquadKind { lowpass, highpass };

inline Biquad design_biquad(BiquadKind kind, double cutoff, double sample_rate, double q) {
  const double w0 = 2.0 * std::numbers::pi * cutoff / sample_rate;
  const double cw = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s{};
  if (kind == BiquadKind::lowpass) {
    s.b0 = (1.0 - cw) / 2.0 / a0;
    s.b1 = (1.0 - cw) / a0;
  } else {
    s.b0 = (1.0 + cw) / 2.0 / a0;
    s.b1 = -(1.0 + cw) / a0;
  }
  s.b2 = s.b0;
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

inline void run_sections(std::span<const Biquad> sections, std::vector<double>& x) {
  for (const auto& s : sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
  }
}

}  // namespace detail

/// 4th-order Butterworth high-pass at `low_hz` cascaded with a 4th-order
/// Butterworth low-pass at `high_hz` (four biquads, bilinear transform).
inline std::vector<Biquad> design_bandpass(double low_hz, double high_hz, double sample_rate) {
  if (!(sample_rate > 2.0 * high_hz)) throw std::invalid_argument("sample rate must exceed twice the upper band edge");
  if (!(low_hz > 0.0 && low_hz < high_hz)) throw std::invalid_argument("band edges must satisfy 0 < low < high");
  // Butterworth pole-pair quality factors for order 4
  const std::array<double, 2> qs{1.0 / (2.0 * std::cos(std::numbers::pi / 8.0)),
                                 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0))};
  std::vector<Biquad> out;
  for (double q : qs) out.push_back(detail::design_biquad(detail::BiquadKind::highpass, low_hz, sample_rate, q));
  for (double q : qs) out.push_back(detail::design_biquad(detail::BiquadKind::lowpass, high_hz, sample_rate, q));
  return out;
}

/// Magnitude response of a section cascade at `freq`.
inline double cascade_gain(std::span<const Biquad> sections, double freq, double sample_rate) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq / sample_rate);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

/// Applies a section cascade causally, or forward-backward with odd-reflection
/// edge padding of up to one second when `zero_phase` is set.
inline std::vector<double> apply_filter(std::span<const Biquad> sections, std::span<const double> signal,
                                        double sample_rate, bool zero_phase) {
  std::vector<double> x(signal.begin(), signal.end());
  if (x.empty()) return x;
  if (!zero_phase) {
    detail::run_sections(sections, x);
    return x;
  }
  const std::size_t n = x.size();
  const std::size_t pad = std::min(n - 1, static_cast<std::size_t>(std::lround(sample_rate)));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);
  detail::run_sections(sections, ext);
  std::reverse(ext.begin(), ext.end());
  detail::run_sections(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline constexpr double kBandLowHz = 2.0;
inline constexpr double kBandHighHz = 50.0;

inline std::vector<double> bandpass_2_50(std::span<const double> signal, double sample_rate, bool zero_phase) {
  if (!(sample_rate > 2.0 * kBandHighHz)) throw std::invalid_argument("bandpass_2_50: sample rate must exceed 100 Hz");
  const auto sections = design_bandpass(kBandLowHz, kBandHighHz, sample_rate);
  return apply_filter(sections, signal, sample_rate, zero_phase);
}

inline EEGEpoch bandpass_2_50(const EEGEpoch& epoch, bool zero_phase) {
  EEGEpoch out = epoch;
  for (std::size_t c = 0; c < epoch.channels(); ++c) {
    const auto y = bandpass_2_50(epoch.data.row(c), epoch.sample_rate, zero_phase);
    std::copy(y.begin(), y.end(), out.data.row(c).begin());
  }
  return out;
}

// --------------------------------------------------------------- resampling

/// Unity-DC-gain Blackman-windowed sinc low-pass; `cutoff` in cycles/sample.
inline std::vector<double> lowpass_fir(std::size_t taps, double cutoff) {
  if (taps % 2 == 0) ++taps;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double k = static_cast<double>(i) - mid;
    const double sinc = k == 0.0 ? 2.0 * cutoff : std::sin(2.0 * std::numbers::pi * cutoff * k) / (std::numbers::pi * k);
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(taps - 1);
    const double w = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
    h[i] = sinc * w;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

inline constexpr std::size_t kDecimation = 4;

/// Anti-aliased 4:1 decimation (1000 Hz -> 250 Hz). Input is padded to a
/// multiple of four by edge replication; output length is ceil(n / 4).
inline std::vector<double> resample_1000_250(std::span<const double> signal) {
  if (signal.empty()) throw std::invalid_argument("resample_1000_250: empty input");
  static const std::vector<double> taps = lowpass_fir(101, 100.0 / 1000.0);
  const std::size_t half = taps.size() / 2;
  const std::size_t n = signal.size();
  const std::size_t padded = (n + kDecimation - 1) / kDecimation * kDecimation;
  auto at = [&](std::ptrdiff_t i) {
    // edge replication on both ends covers the multiple-of-4 padding too
    if (i < 0) return signal.front();
    if (i >= static_cast<std::ptrdiff_t>(n)) return signal.back();
    return signal[static_cast<std::size_t>(i)];
  };
  std::vector<double> out;
  out.reserve(padded / kDecimation);
  for (std::size_t c = 0; c < padded; c += kDecimation) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k)
      acc += taps[k] * at(static_cast<std::ptrdiff_t>(c + k) - static_cast<std::ptrdiff_t>(half));
    out.push_back(acc);
  }
  return out;
}

inline EEGEpoch resample_1000_250(const EEGEpoch& epoch) {
  if (std::abs(epoch.sample_rate - 1000.0) > 1e-9) throw std::invalid_argument("resample_1000_250: input must be 1000 Hz");
  EEGEpoch out;
  out.sample_rate = 250.0;
  out.event_tag = epoch.event_tag;
  out.event_time = epoch.event_time;
  out.data = Tensor2D(epoch.channels(), (epoch.samples() + kDecimation - 1) / kDecimation);
  for (std::size_t c = 0; c < epoch.channels(); ++c) {
    const auto y = resample_1000_250(epoch.data.row(c));
    std::copy(y.begin(), y.end(), out.data.row(c).begin());
  }
  return out;
}

// ----------------------------------------------------------------- epoching

/// Cuts `span` seconds starting at `event_time` (seconds from recording start).
inline EEGEpoch extract_epoch(const EEGEpoch& recording, double event_time, double span, std::string tag = {}) {
  const auto start = static_cast<long long>(std::llround(event_time * recording.sample_rate));
  const auto count = static_cast<long long>(std::llround(span * recording.sample_rate));
  if (count <= 0) throw std::invalid_argument("extract_epoch: span must cover at least one sample");
  if (start < 0 || start + count > static_cast<long long>(recording.samples()))
    throw BoundaryError("extract_epoch: event at " + std::to_string(event_time) + " s with span " +
                        std::to_string(span) + " s exceeds recording");
  EEGEpoch e;
  e.sample_rate = recording.sample_rate;
  e.event_tag = std::move(tag);
  e.event_time = recording.event_time + event_time;
  e.data = Tensor2D(recording.channels(), static_cast<std::size_t>(count));
  for (std::size_t c = 0; c < recording.channels(); ++c) {
    const auto src = recording.data.row(c).subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(count));
    std::copy(src.begin(), src.end(), e.data.row(c).begin());
  }
  return e;
}

/// Zero-pads every channel to `length` samples.
inline EEGEpoch zero_pad(const EEGEpoch& epoch, std::size_t length) {
  if (length < epoch.samples()) throw std::invalid_argument("zero_pad: target shorter than epoch");
  EEGEpoch out = epoch;
  out.data = Tensor2D(epoch.channels(), length);
  for (std::size_t c = 0; c < epoch.channels(); ++c)
    std::copy(epoch.data.row(c).begin(), epoch.data.row(c).end(), out.data.row(c).begin());
  return out;
}

// ---------------------------------------------------------------------- PSD

/// One-sided power spectral density, µV²/Hz, one row per channel.
struct PSDSpectrum {
  std::vector<double> frequencies;
  Tensor2D power;

  double resolution() const { return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0; }
  bool operator==(const PSDSpectrum&) const = default;
};

/// Welch estimate with a periodic Hann window and per-segment mean removal.
/// `nfft` (>= segment_length, 0 = segment_length) zero-pads each segment.
inline PSDSpectrum welch_psd(std::span<const double> signal, double sample_rate, std::size_t segment_length,
                             double overlap_fraction, std::size_t nfft = 0) {
  if (segment_length == 0 || segment_length > signal.size())
    throw std::invalid_argument("welch_psd: segment length must be in [1, samples]");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw std::invalid_argument("welch_psd: overlap must be in [0, 1)");
  if (nfft == 0) nfft = segment_length;
  if (nfft < segment_length) throw std::invalid_argument("welch_psd: nfft shorter than segment");

  std::vector<double> window(segment_length);
  double wpow = 0.0;
  for (std::size_t i = 0; i < segment_length; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment_length));
    wpow += window[i] * window[i];
  }
  if (segment_length == 1) {
    window[0] = 1.0;
    wpow = 1.0;
  }
  const std::size_t step =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(segment_length) * (1.0 - overlap_fraction))));
  const std::size_t bins = nfft / 2 + 1;
  std::vector<double> acc(bins, 0.0);
  std::vector<double> buf(nfft, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + segment_length <= signal.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < segment_length; ++i) mean += signal[start + i];
    mean /= static_cast<double>(segment_length);
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < segment_length; ++i) buf[i] = (signal[start + i] - mean) * window[i];
    const auto spec = fft::rfft(buf);
    for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spec[k]);
    ++segments;
  }
  PSDSpectrum out;
  out.power = Tensor2D(1, bins);
  out.frequencies.resize(bins);
  const double scale = 1.0 / (sample_rate * wpow * static_cast<double>(segments));
  for (std::size_t k = 0; k < bins; ++k) {
    out.frequencies[k] = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
    const bool edge = k == 0 || (nfft % 2 == 0 && k == bins - 1);
    out.power(0, k) = acc[k] * scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

inline PSDSpectrum welch_psd(const EEGEpoch& epoch, std::size_t segment_length, double overlap_fraction,
                             std::size_t nfft = 0) {
  if (segment_length > epoch.samples()) throw std::invalid_argument("welch_psd: segment longer than epoch");
  PSDSpectrum out;
  for (std::size_t c = 0; c < epoch.channels(); ++c) {
    auto one = welch_psd(epoch.data.row(c), epoch.sample_rate, segment_length, overlap_fraction, nfft);
    if (c == 0) {
      out.frequencies = one.frequencies;
      out.power = Tensor2D(epoch.channels(), one.frequencies.size());
    }
    std::copy(one.power.values.begin(), one.power.values.end(), out.power.row(c).begin());
  }
  return out;
}

// -------------------------------------------------------------- band powers

enum class Band : std::uint8_t { delta = 0, theta = 1, alpha = 2, beta = 3 };
inline constexpr std::size_t kBandCount = 4;
inline constexpr std::array<Band, kBandCount> kAllBands{Band::delta, Band::theta, Band::alpha, Band::beta};

inline std::string_view to_string(Band b) {
  constexpr std::array<std::string_view, kBandCount> names{"delta", "theta", "alpha", "beta"};
  return names[static_cast<std::size_t>(b)];
}

inline Band parse_band(std::string_view s) {
  for (Band b : kAllBands)
    if (to_string(b) == s) return b;
  throw std::invalid_argument("unknown band '" + std::string(s) + "'");
}

struct BandEdges {
  std::array<std::array<double, 2>, kBandCount> hz{{{2.0, 4.0}, {4.0, 7.0}, {8.0, 12.0}, {13.0, 30.0}}};
  const std::array<double, 2>& operator[](Band b) const { return hz[static_cast<std::size_t>(b)]; }
};

/// Integrated power per band and channel, µV².
struct BandPowers {
  std::array<std::vector<double>, kBandCount> values;

  std::vector<double>& operator[](Band b) { return values[static_cast<std::size_t>(b)]; }
  const std::vector<double>& operator[](Band b) const { return values[static_cast<std::size_t>(b)]; }
  std::size_t channels() const { return values[0].size(); }
  bool operator==(const BandPowers&) const = default;
};

/// Trapezoidal integral of one PSD row over [lo, hi], interpolating the
/// spectrum linearly at band edges so adjacent bands add up exactly.
inline double integrate_band(std::span<const double> freqs, std::span<const double> power, double lo, double hi) {
  if (hi <= lo || freqs.size() < 2) return 0.0;
  auto value_at = [&](double f) {
    auto it = std::upper_bound(freqs.begin(), freqs.end(), f);
    if (it == freqs.begin()) return power.front();
    if (it == freqs.end()) return power.back();
    const std::size_t k = static_cast<std::size_t>(it - freqs.begin());
    const double t = (f - freqs[k - 1]) / (freqs[k] - freqs[k - 1]);
    return power[k - 1] + t * (power[k] - power[k - 1]);
  };
  double total = 0.0;
  double prev_f = lo, prev_p = value_at(lo);
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (freqs[k] <= lo) continue;
    if (freqs[k] >= hi) break;
    total += 0.5 * (prev_p + power[k]) * (freqs[k] - prev_f);
    prev_f = freqs[k];
    prev_p = power[k];
  }
  total += 0.5 * (prev_p + value_at(hi)) * (hi - prev_f);
  return total;
}

inline BandPowers band_powers(const PSDSpectrum& spectrum, const BandEdges& edges = {}) {
  double lo = edges[Band::delta][0], hi = edges[Band::delta][1];
  for (Band b : kAllBands) {
    lo = std::min(lo, edges[b][0]);
    hi = std::max(hi, edges[b][1]);
  }
  if (spectrum.frequencies.empty() || spectrum.frequencies.front() > lo || spectrum.frequencies.back() < hi)
    throw std::invalid_argument("band_powers: spectrum does not cover the band range");
  BandPowers bp;
  for (Band b : kAllBands) {
    auto& v = bp[b];
    v.resize(spectrum.power.rows);
    for (std::size_t c = 0; c < spectrum.power.rows; ++c)
      v[c] = integrate_band(spectrum.frequencies, spectrum.power.row(c), edges[b][0], edges[b][1]);
  }
  return bp;
}

// -------------------------------------------------------------- baselining

inline BandPowers baseline_subtract(const BandPowers& condition, const BandPowers& baseline) {
  BandPowers out;
  for (Band b : kAllBands) {
    if (condition[b].size() != baseline[b].size()) throw ShapeError("baseline_subtract: channel counts differ");
    out[b].resize(condition[b].size());
    for (std::size_t c = 0; c < condition[b].size(); ++c) out[b][c] = condition[b][c] - baseline[b][c];
  }
  return out;
}

inline PSDSpectrum baseline_subtract(const PSDSpectrum& condition, const PSDSpectrum& baseline) {
  if (condition.power.rows != baseline.power.rows || condition.power.cols != baseline.power.cols)
    throw ShapeError("baseline_subtract: spectrum shapes differ");
  for (std::size_t k = 0; k < condition.frequencies.size(); ++k)
    if (std::abs(condition.frequencies[k] - baseline.frequencies[k]) > 1e-9)
      throw ShapeError("baseline_subtract: frequency grids differ");
  PSDSpectrum out = condition;
  for (std::size_t i = 0; i < out.power.values.size(); ++i) out.power.values[i] -= baseline.power.values[i];
  return out;
}

/// Element-wise mean of same-shaped spectra.
inline PSDSpectrum mean_spectrum(std::span<const PSDSpectrum> spectra) {
  if (spectra.empty()) throw std::invalid_argument("mean_spectrum: no spectra");
  PSDSpectrum out = spectra.front();
  for (std::size_t i = 1; i < spectra.size(); ++i) {
    if (spectra[i].power.values.size() != out.power.values.size()) throw ShapeError("mean_spectrum: shapes differ");
    for (std::size_t k = 0; k < out.power.values.size(); ++k) out.power.values[k] += spectra[i].power.values[k];
  }
  for (double& v : out.power.values) v /= static_cast<double>(spectra.size());
  return out;
}

// ----------------------------------------------------------------- segments

/// Splits into contiguous thirds; a remainder r goes to the first r segments.
template <class T>
std::array<std::vector<T>, 3> split_segments(std::span<const T> items) {
  if (items.size() < 3) throw std::invalid_argument("split_segments: need at least 3 items");
  const std::size_t base = items.size() / 3, rem = items.size() % 3;
  std::array<std::vector<T>, 3> out;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t len = base + (s < rem ? 1 : 0);
    out[s].assign(items.begin() + static_cast<std::ptrdiff_t>(pos), items.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

template <class T>
std::array<std::vector<T>, 3> split_segments(const std::vector<T>& items) {
  return split_segments(std::span<const T>(items));
}

/// Segment sizes for `n` items under the split_segments rule.
inline std::array<std::size_t, 3> segment_sizes(std::size_t n) {
  if (n < 3) throw std::invalid_argument("segment_sizes: need at least 3 items");
  const std::size_t base = n / 3, rem = n % 3;
  return {base + (rem > 0), base + (rem > 1), base};
}

}  // namespace neuroadapt::eeg

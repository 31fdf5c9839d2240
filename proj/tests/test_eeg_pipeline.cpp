#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "neuroadapt/channel_layout.hpp"
#include "neuroadapt/eeg_io.hpp"
#include "neuroadapt/eeg_pipeline.hpp"
#include "neuroadapt/fft.hpp"

using namespace neuroadapt;
using namespace neuroadapt::eeg;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> sine(double freq, double seconds, double rate, double amp = 1.0, double offset = 0.0) {
  std::vector<double> x(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = offset + amp * std::sin(kTwoPi * freq * static_cast<double>(i) / rate);
  return x;
}

double rms(std::span<const double> x, std::size_t skip = 0) {
  double s = 0.0;
  for (std::size_t i = skip; i < x.size() - skip; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(x.size() - 2 * skip));
}

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

EEGEpoch epoch_from_rows(const std::vector<std::vector<double>>& rows, double rate) {
  EEGEpoch e;
  e.sample_rate = rate;
  e.data = Tensor2D(rows.size(), rows.front().size());
  for (std::size_t c = 0; c < rows.size(); ++c) std::copy(rows[c].begin(), rows[c].end(), e.data.row(c).begin());
  return e;
}

PSDSpectrum line_spectrum(double freq) {
  PSDSpectrum p;
  for (int k = 0; k <= 500; ++k) p.frequencies.push_back(0.1 * k);
  p.power = Tensor2D(1, p.frequencies.size());
  p.power(0, static_cast<std::size_t>(std::llround(freq / 0.1))) = 1.0;
  return p;
}

std::vector<double> white(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

}  // namespace

TEST(Bandpass, PassbandRmsPreserved) {
  const auto x = sine(10.0, 4.0, 1000.0);
  for (bool zp : {true, false}) {
    const auto y = bandpass_2_50(x, 1000.0, zp);
    ASSERT_EQ(y.size(), x.size());
    EXPECT_NEAR(rms(y, 500) / rms(x, 500), 1.0, 0.05) << "zero_phase " << zp;
  }
}

TEST(Bandpass, RemovesDc) {
  const std::vector<double> x(4000, 5.0);
  for (bool zp : {true, false}) {
    const auto y = bandpass_2_50(x, 1000.0, zp);
    EXPECT_LT(std::abs(mean(y)), 0.05) << "zero_phase " << zp;
  }
}

TEST(Bandpass, ZeroPhaseAttenuates80HzBy20dB) {
  const auto x = sine(80.0, 4.0, 1000.0);
  const auto y = bandpass_2_50(x, 1000.0, true);
  EXPECT_LE(20.0 * std::log10(rms(y, 500) / rms(x, 500)), -20.0);
}

TEST(Bandpass, RejectsLowSampleRate) {
  const std::vector<double> x(100, 0.0);
  EXPECT_THROW(bandpass_2_50(x, 100.0, true), std::invalid_argument);
}

TEST(Bandpass, ZeroPhasePreservesPeakLatency) {
  std::vector<double> x(2000, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (static_cast<double>(i) - 1000.0) / 15.0;
    x[i] = std::exp(-0.5 * z * z);
  }
  const auto y = bandpass_2_50(x, 1000.0, true);
  const auto peak = std::max_element(y.begin(), y.end()) - y.begin();
  EXPECT_LE(std::abs(peak - 1000), 1);
}

TEST(Resample, LengthRatio) {
  EXPECT_EQ(resample_1000_250(std::vector<double>(4000, 0.0)).size(), 1000u);
  EXPECT_EQ(resample_1000_250(std::vector<double>(4001, 0.0)).size(), 1001u);
  EXPECT_THROW(resample_1000_250(std::vector<double>{}), std::invalid_argument);
}

TEST(Resample, MatchesAnalyticSampling) {
  const auto x = sine(10.0, 4.0, 1000.0);
  const auto y = resample_1000_250(x);
  const auto ref = sine(10.0, 4.0, 250.0);
  ASSERT_EQ(y.size(), ref.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  const double my = mean(y), mr = mean(ref);
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxy += (y[i] - my) * (ref[i] - mr);
    sxx += (y[i] - my) * (y[i] - my);
    syy += (ref[i] - mr) * (ref[i] - mr);
  }
  EXPECT_GE(sxy / std::sqrt(sxx * syy), 0.99);
}

TEST(Resample, ConstantStaysConstant) {
  const auto y = resample_1000_250(std::vector<double>(1003, 3.25));
  for (double v : y) EXPECT_NEAR(v, 3.25, 1e-9);
}

TEST(ExtractEpoch, SampleCounts) {
  const auto rec250 = epoch_from_rows({std::vector<double>(1000, 0.0)}, 250.0);
  EXPECT_EQ(extract_epoch(rec250, 1.0, 0.4).samples(), 100u);
  const auto rec1000 = epoch_from_rows({std::vector<double>(3000, 0.0)}, 1000.0);
  EXPECT_EQ(extract_epoch(rec1000, 0.5, 1.2).samples(), 1200u);
  EXPECT_THROW(extract_epoch(rec1000, 3.0, 0.4), BoundaryError);
  EXPECT_THROW(extract_epoch(rec1000, -0.1, 0.4), BoundaryError);
}

TEST(ExtractEpoch, CopiesTheRightSamples) {
  std::vector<double> ramp(1000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  const auto e = extract_epoch(epoch_from_rows({ramp}, 250.0), 0.5, 0.4);
  EXPECT_EQ(e.data(0, 0), 125.0);
  EXPECT_EQ(e.data(0, 99), 224.0);
}

TEST(Welch, SinusoidPeakAtNearestBin) {
  const auto x = sine(6.0, 4.0, 250.0);
  const auto p = welch_psd(x, 250.0, 256, 0.5);
  const auto row = p.power.row(0);
  const auto peak = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  std::size_t nearest = 0;
  for (std::size_t k = 0; k < p.frequencies.size(); ++k)
    if (std::abs(p.frequencies[k] - 6.0) < std::abs(p.frequencies[nearest] - 6.0)) nearest = k;
  EXPECT_EQ(peak, nearest);
}

TEST(Welch, ZeroSignalZeroPower) {
  const auto p = welch_psd(std::vector<double>(1000, 0.0), 250.0, 256, 0.5);
  for (double v : p.power.values) EXPECT_EQ(v, 0.0);
}

TEST(Welch, FrequencyGrid) {
  const auto p = welch_psd(white(1000, 1), 250.0, 100, 0.5, 256);
  EXPECT_EQ(p.frequencies.size(), 129u);
  EXPECT_EQ(p.frequencies.front(), 0.0);
  EXPECT_DOUBLE_EQ(p.frequencies.back(), 125.0);
  EXPECT_NEAR(p.resolution(), 250.0 / 256.0, 1e-12);
  for (std::size_t k = 1; k < p.frequencies.size(); ++k) EXPECT_GT(p.frequencies[k], p.frequencies[k - 1]);
  for (double v : p.power.values) EXPECT_GE(v, 0.0);
}

TEST(Welch, RejectsBadGeometry) {
  const std::vector<double> x(100, 1.0);
  EXPECT_THROW(welch_psd(x, 250.0, 101, 0.0), std::invalid_argument);
  EXPECT_THROW(welch_psd(x, 250.0, 50, 1.0), std::invalid_argument);
  const auto e = epoch_from_rows({x}, 250.0);
  EXPECT_THROW(welch_psd(e, 200, 0.5), std::invalid_argument);
}

TEST(Welch, ParsevalOnStationarySignals) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto x = white(20000, seed);
    const auto p = welch_psd(x, 250.0, 256, 0.5);
    double total = 0.0;
    for (double v : p.power.values) total += v * p.resolution();
    EXPECT_NEAR(total / variance(x), 1.0, 0.02) << "seed " << seed;
  }
}

TEST(Welch, WhiteNoiseIsFlat) {
  std::vector<double> acc;
  std::vector<double> freqs;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto p = welch_psd(white(1000, derive_seed(seed, 3)), 250.0, 256, 0.5);
    if (acc.empty()) {
      acc.assign(p.frequencies.size(), 0.0);
      freqs = p.frequencies;
    }
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p.power(0, k) / 100.0;
  }
  double lo = 1e300, hi = 0.0, sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    if (freqs[k] < 5.0 || freqs[k] > 40.0) continue;
    lo = std::min(lo, acc[k]);
    hi = std::max(hi, acc[k]);
    sum += acc[k];
    ++n;
  }
  const double avg = sum / static_cast<double>(n);
  EXPECT_LE(10.0 * std::log10(hi / avg), 3.0);
  EXPECT_GE(10.0 * std::log10(lo / avg), -3.0);
}

TEST(BandPowers, LineAtSixHzIsTheta) {
  const auto bp = band_powers(line_spectrum(6.0));
  double total = 0.0;
  for (Band b : kAllBands) total += bp[b][0];
  const PSDSpectrum s = line_spectrum(6.0);
  EXPECT_GE(bp[Band::theta][0] / integrate_band(s.frequencies, s.power.row(0), 2.0, 30.0), 0.95);
  EXPECT_GE(bp[Band::theta][0] / total, 0.95);
}

TEST(BandPowers, LineAtTenHzIsAlpha) {
  const auto bp = band_powers(line_spectrum(10.0));
  for (Band b : {Band::delta, Band::theta, Band::beta}) EXPECT_GT(bp[Band::alpha][0], bp[b][0]);
}

TEST(BandPowers, ZeroSpectrum) {
  PSDSpectrum p = line_spectrum(6.0);
  std::fill(p.power.values.begin(), p.power.values.end(), 0.0);
  const auto bp = band_powers(p);
  for (Band b : kAllBands) EXPECT_EQ(bp[b][0], 0.0);
}

TEST(BandPowers, RejectsInsufficientCoverage) {
  PSDSpectrum p;
  p.frequencies = {0.0, 5.0, 10.0, 20.0};
  p.power = Tensor2D(1, 4, 1.0);
  EXPECT_THROW(band_powers(p), std::invalid_argument);
}

TEST(BandPowers, AdditiveOverAdjacentBands) {
  const auto p = welch_psd(white(2000, 5), 250.0, 256, 0.5);
  const auto row = p.power.row(0);
  for (double mid : {3.3, 4.0, 7.5, 12.9, 20.0}) {
    const double whole = integrate_band(p.frequencies, row, 2.0, 30.0);
    const double split = integrate_band(p.frequencies, row, 2.0, mid) + integrate_band(p.frequencies, row, mid, 30.0);
    EXPECT_NEAR(whole, split, 1e-12 * whole);
  }
}

TEST(Baseline, Subtraction) {
  BandPowers a, b;
  for (Band band : kAllBands) {
    a[band] = {5.0, 1.0};
    b[band] = {2.0, 4.0};
  }
  const auto self = baseline_subtract(a, a);
  for (Band band : kAllBands)
    for (double v : self[band]) EXPECT_EQ(v, 0.0);
  const auto d = baseline_subtract(a, b);
  EXPECT_EQ(d[Band::theta][0], 3.0);
  EXPECT_EQ(d[Band::theta][1], -3.0);
  BandPowers c;
  for (Band band : kAllBands) c[band] = {1.0};
  EXPECT_THROW(baseline_subtract(a, c), ShapeError);
}

TEST(Baseline, SpectrumGridMustMatch) {
  const auto a = welch_psd(white(1000, 1), 250.0, 256, 0.5);
  const auto zero = baseline_subtract(a, a);
  for (double v : zero.power.values) EXPECT_EQ(v, 0.0);
  const auto b = welch_psd(white(1000, 1), 500.0, 256, 0.5);
  EXPECT_THROW(baseline_subtract(a, b), ShapeError);
}

TEST(Segments, Split) {
  std::vector<int> nine(9), ten(10);
  std::iota(nine.begin(), nine.end(), 0);
  std::iota(ten.begin(), ten.end(), 0);
  const auto s9 = split_segments(nine);
  EXPECT_EQ(s9[0].size(), 3u);
  EXPECT_EQ(s9[1].size(), 3u);
  EXPECT_EQ(s9[2].size(), 3u);
  const auto s10 = split_segments(ten);
  EXPECT_EQ(s10[0], (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(s10[1], (std::vector<int>{4, 5, 6}));
  EXPECT_EQ(s10[2], (std::vector<int>{7, 8, 9}));
  EXPECT_THROW(split_segments(std::vector<int>{1, 2}), std::invalid_argument);
  for (std::size_t n = 3; n < 40; ++n) {
    const auto sz = segment_sizes(n);
    EXPECT_EQ(sz[0] + sz[1] + sz[2], n);
    EXPECT_LE(sz[0] - sz[2], 1u);
  }
}

TEST(Pipeline, CompositionIsBitwiseDeterministic) {
  auto run = [] {
    std::vector<std::vector<double>> rows;
    for (std::uint64_t c = 0; c < 4; ++c) rows.push_back(white(3000, 100 + c));
    const auto e = bandpass_2_50(resample_1000_250(epoch_from_rows(rows, 1000.0)), true);
    return band_powers(welch_psd(extract_epoch(e, 1.0, 0.4), 100, 0.0, 256));
  };
  EXPECT_EQ(run(), run());
}

TEST(Fft, MatchesDirectDft) {
  const auto x = white(37, 2);
  const auto X = fft::rfft(x);
  ASSERT_EQ(X.size(), 19u);
  for (std::size_t k = 0; k < X.size(); ++k) {
    std::complex<double> ref{0.0, 0.0};
    for (std::size_t n = 0; n < x.size(); ++n)
      ref += x[n] * std::polar(1.0, -kTwoPi * static_cast<double>(k * n) / static_cast<double>(x.size()));
    EXPECT_NEAR(std::abs(X[k] - ref), 0.0, 1e-10);
  }
}

TEST(EegIo, EpochCsvAndBinaryRoundTrip) {
  auto e = epoch_from_rows({white(50, 1), white(50, 2)}, 250.0);
  e.event_tag = "sudden";
  e.event_time = 12.5;
  std::stringstream csv;
  write_epoch_csv(e, csv);
  const auto back = read_epoch_csv(csv);
  EXPECT_EQ(back.data, e.data);
  EXPECT_EQ(back.sample_rate, e.sample_rate);
  std::stringstream bin;
  write_epoch_binary(e, bin);
  EXPECT_EQ(read_epoch_binary(bin), e);
}

TEST(EegIo, PsdAndBandPowerRoundTrip) {
  const auto p = welch_psd(epoch_from_rows({white(500, 1), white(500, 2)}, 250.0), 100, 0.5, 256);
  std::stringstream csv;
  write_psd_csv(p, csv);
  EXPECT_EQ(read_psd_csv(csv), p);
  std::stringstream bin;
  write_psd_binary(p, bin);
  EXPECT_EQ(read_psd_binary(bin), p);
  const auto bp = band_powers(p);
  std::stringstream bcsv;
  write_band_powers_csv(bp, bcsv);
  EXPECT_EQ(read_band_powers_csv(bcsv), bp);
}

TEST(EegIo, RejectsForeignHeader) {
  std::stringstream ss("# something-else v1\nchannel,sample,value\n");
  EXPECT_THROW(read_epoch_csv(ss), FormatError);
}

TEST(ChannelLayout, ShippedFileMatchesBuiltIn) {
  const auto layout = load_layout(std::string(NEUROADAPT_DATA_DIR) + "/channel_layout_v1.csv");
  EXPECT_EQ(layout, default_layout());
  EXPECT_EQ(layout.size(), kChannels);
  EXPECT_THROW(channel_index(layout, "Xx"), std::invalid_argument);
}

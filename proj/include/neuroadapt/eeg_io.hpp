#pragma once

// CSV and binary exports for epochs, spectra and band powers. Layouts are
// described in docs/formats.md. Doubles are written with 17 significant
// digits so every text export round-trips exactly.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "neuroadapt/binary_io.hpp"
#include "neuroadapt/eeg_pipeline.hpp"

namespace neuroadapt::eeg {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

/// Parses "key=value" tokens after the format tag of a '#' header line.
inline std::map<std::string, std::string> header_fields(const std::string& line, const std::string& tag) {
  std::istringstream ss(line);
  std::string hash, got_tag, version;
  ss >> hash >> got_tag >> version;
  if (hash != "#" || got_tag != tag || version != "v1") throw FormatError("expected '# " + tag + " v1' header");
  std::map<std::string, std::string> f;
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header token '" + tok + "'");
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return f;
}

inline double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError("trailing characters in number '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw FormatError("not a number: '" + s + "'");
  } catch (const std::out_of_range&) {
    throw FormatError("number out of range: '" + s + "'");
  }
}

inline std::size_t to_index(const std::string& s) {
  const double v = to_double(s);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) throw FormatError("bad index '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

// Event tags must not contain whitespace in the CSV header; they are
// percent-free identifiers in practice (e.g. "trial_12").

inline void write_epoch_csv(const EEGEpoch& e, std::ostream& os) {
  os << "# neuroadapt-epoch v1 sample_rate=" << format_double(e.sample_rate)
     << " event_time=" << format_double(e.event_time) << " channels=" << e.channels() << " samples=" << e.samples()
     << " event_tag=" << e.event_tag << "\n";
  os << "channel,sample,value\n";
  for (std::size_t c = 0; c < e.channels(); ++c)
    for (std::size_t s = 0; s < e.samples(); ++s) os << c << ',' << s << ',' << format_double(e.data(c, s)) << '\n';
}

inline EEGEpoch read_epoch_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty epoch CSV");
  auto f = detail::header_fields(line, "neuroadapt-epoch");
  EEGEpoch e;
  e.sample_rate = detail::to_double(f.at("sample_rate"));
  e.event_time = detail::to_double(f.at("event_time"));
  e.event_tag = f.count("event_tag") ? f["event_tag"] : "";
  e.data = Tensor2D(detail::to_index(f.at("channels")), detail::to_index(f.at("samples")));
  if (!std::getline(is, line) || line != "channel,sample,value") throw FormatError("epoch CSV: bad column header");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3) throw FormatError("epoch CSV: expected 3 columns");
    const auto c = detail::to_index(cols[0]), s = detail::to_index(cols[1]);
    if (c >= e.channels() || s >= e.samples()) throw FormatError("epoch CSV: index out of range");
    e.data(c, s) = detail::to_double(cols[2]);
    ++rows;
  }
  if (rows != e.data.values.size()) throw FormatError("epoch CSV: incomplete data");
  return e;
}

inline void write_psd_csv(const PSDSpectrum& p, std::ostream& os) {
  os << "# neuroadapt-psd v1 channels=" << p.power.rows << " bins=" << p.frequencies.size() << "\n";
  os << "channel,frequency,value\n";
  for (std::size_t c = 0; c < p.power.rows; ++c)
    for (std::size_t k = 0; k < p.frequencies.size(); ++k)
      os << c << ',' << format_double(p.frequencies[k]) << ',' << format_double(p.power(c, k)) << '\n';
}

inline PSDSpectrum read_psd_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty PSD CSV");
  auto f = detail::header_fields(line, "neuroadapt-psd");
  const std::size_t channels = detail::to_index(f.at("channels")), bins = detail::to_index(f.at("bins"));
  if (!std::getline(is, line) || line != "channel,frequency,value") throw FormatError("PSD CSV: bad column header");
  PSDSpectrum p;
  p.frequencies.assign(bins, 0.0);
  p.power = Tensor2D(channels, bins);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3) throw FormatError("PSD CSV: expected 3 columns");
    const std::size_t c = detail::to_index(cols[0]);
    const std::size_t k = row % bins;
    if (c != row / bins || c >= channels) throw FormatError("PSD CSV: rows out of order");
    p.frequencies[k] = detail::to_double(cols[1]);
    p.power(c, k) = detail::to_double(cols[2]);
    ++row;
  }
  if (row != channels * bins) throw FormatError("PSD CSV: incomplete data");
  return p;
}

inline void write_band_powers_csv(const BandPowers& bp, std::ostream& os) {
  os << "# neuroadapt-bands v1 channels=" << bp.channels() << "\n";
  os << "channel,band,value\n";
  for (std::size_t c = 0; c < bp.channels(); ++c)
    for (Band b : kAllBands) os << c << ',' << to_string(b) << ',' << format_double(bp[b][c]) << '\n';
}

inline BandPowers read_band_powers_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty band CSV");
  auto f = detail::header_fields(line, "neuroadapt-bands");
  const std::size_t channels = detail::to_index(f.at("channels"));
  if (!std::getline(is, line) || line != "channel,band,value") throw FormatError("band CSV: bad column header");
  BandPowers bp;
  for (Band b : kAllBands) bp[b].assign(channels, 0.0);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 3) throw FormatError("band CSV: expected 3 columns");
    const std::size_t c = detail::to_index(cols[0]);
    if (c >= channels) throw FormatError("band CSV: channel out of range");
    bp[parse_band(cols[1])][c] = detail::to_double(cols[2]);
    ++rows;
  }
  if (rows != channels * kBandCount) throw FormatError("band CSV: incomplete data");
  return bp;
}

// Binary layouts: little-endian, see docs/formats.md.

inline void write_epoch_binary(const EEGEpoch& e, std::ostream& os) {
  io::write_magic(os, "NAEP");
  io::write_u32(os, 1);
  io::write_f64(os, e.sample_rate);
  io::write_f64(os, e.event_time);
  io::write_string(os, e.event_tag);
  io::write_u32(os, static_cast<std::uint32_t>(e.channels()));
  io::write_u32(os, static_cast<std::uint32_t>(e.samples()));
  for (double v : e.data.values) io::write_f64(os, v);
}

inline EEGEpoch read_epoch_binary(std::istream& is) {
  io::expect_magic(is, "NAEP");
  if (io::read_u32(is) != 1) throw FormatError("unsupported epoch format version");
  EEGEpoch e;
  e.sample_rate = io::read_f64(is);
  e.event_time = io::read_f64(is);
  e.event_tag = io::read_string(is);
  const std::size_t ch = io::read_u32(is), n = io::read_u32(is);
  if (ch * n > (1u << 28)) throw FormatError("implausible epoch size");
  e.data = Tensor2D(ch, n);
  for (double& v : e.data.values) v = io::read_f64(is);
  return e;
}

inline void write_psd_binary(const PSDSpectrum& p, std::ostream& os) {
  io::write_magic(os, "NAPS");
  io::write_u32(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(p.power.rows));
  io::write_u32(os, static_cast<std::uint32_t>(p.frequencies.size()));
  for (double f : p.frequencies) io::write_f64(os, f);
  for (double v : p.power.values) io::write_f64(os, v);
}

inline PSDSpectrum read_psd_binary(std::istream& is) {
  io::expect_magic(is, "NAPS");
  if (io::read_u32(is) != 1) throw FormatError("unsupported PSD format version");
  const std::size_t ch = io::read_u32(is), bins = io::read_u32(is);
  if (ch * bins > (1u << 28)) throw FormatError("implausible PSD size");
  PSDSpectrum p;
  p.frequencies.resize(bins);
  for (double& f : p.frequencies) f = io::read_f64(is);
  p.power = Tensor2D(ch, bins);
  for (double& v : p.power.values) v = io::read_f64(is);
  return p;
}

inline void save_epoch_file(const EEGEpoch& e, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  write_epoch_binary(e, os);
}

inline EEGEpoch load_epoch_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read '" + path + "'");
  return read_epoch_binary(is);
}

}  // namespace neuroadapt::eeg

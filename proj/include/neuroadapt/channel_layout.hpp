#pragma once

// 32-channel 10-20 montage with 2-D projected positions. The same table ships
// as data/channel_layout_v1.csv; azimuthal equidistant projection, unit radius at the
// nasion-inion equator (Fz-Cz = 0.4).

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "neuroadapt/common.hpp"

namespace neuroadapt::eeg {

struct ChannelPosition {
  std::string name;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const ChannelPosition&) const = default;
};

using ChannelLayout = std::vector<ChannelPosition>;

inline const ChannelLayout& default_layout() {
  static const ChannelLayout layout{
      {"Fp1", -0.247, 0.761}, {"Fp2", 0.247, 0.761},   {"F7", -0.647, 0.470},  {"F3", -0.415, 0.513},
      {"Fz", 0.000, 0.400},   {"F4", 0.415, 0.513},    {"F8", 0.647, 0.470},   {"FC5", -0.720, 0.260},
      {"FC1", -0.240, 0.220}, {"FC2", 0.240, 0.220},   {"FC6", 0.720, 0.260},  {"T7", -0.800, 0.000},
      {"C3", -0.400, 0.000},  {"Cz", 0.000, 0.000},    {"C4", 0.400, 0.000},   {"T8", 0.800, 0.000},
      {"TP9", -0.950, -0.250}, {"CP5", -0.720, -0.260}, {"CP1", -0.240, -0.220}, {"CP2", 0.240, -0.220},
      {"CP6", 0.720, -0.260}, {"TP10", 0.950, -0.250}, {"P7", -0.647, -0.470}, {"P3", -0.415, -0.513},
      {"Pz", 0.000, -0.400},  {"P4", 0.415, -0.513},   {"P8", 0.647, -0.470},  {"PO9", -0.550, -0.800},
      {"O1", -0.247, -0.761}, {"Oz", 0.000, -0.800},   {"O2", 0.247, -0.761},  {"PO10", 0.550, -0.800},
  };
  return layout;
}

inline std::size_t channel_index(const ChannelLayout& layout, std::string_view name) {
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name == name) return i;
  throw std::invalid_argument("no channel named '" + std::string(name) + "'");
}

inline constexpr std::string_view kFrontalCentral = "Fz";

/// exp(-d^2 / 2) falloff around the named channel.
inline std::vector<double> channel_weights(const ChannelLayout& layout, std::string_view center = kFrontalCentral) {
  const auto& c = layout[channel_index(layout, center)];
  std::vector<double> w;
  w.reserve(layout.size());
  for (const auto& p : layout) {
    const double dx = p.x - c.x, dy = p.y - c.y;
    w.push_back(std::exp(-(dx * dx + dy * dy) / 2.0));
  }
  return w;
}

/// Reads the versioned layout file ("# neuroadapt-layout v1", then index,name,x,y).
inline ChannelLayout load_layout(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read layout '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line.rfind("# neuroadapt-layout v1", 0) != 0) throw FormatError("layout: bad header");
  if (!std::getline(is, line) || line != "index,name,x,y") throw FormatError("layout: bad column header");
  ChannelLayout layout;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string idx, name, x, y;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, name, ',') || !std::getline(ss, x, ',') || !std::getline(ss, y))
      throw FormatError("layout: malformed row '" + line + "'");
    if (std::stoul(idx) != layout.size()) throw FormatError("layout: indices must be consecutive");
    layout.push_back({name, std::stod(x), std::stod(y)});
  }
  return layout;
}

}  // namespace neuroadapt::eeg

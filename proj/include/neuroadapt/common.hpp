#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace neuroadapt {

/// Dimension or grid mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite numbers appeared during training or integration.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested window falls outside the available data.
class BoundaryError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a tag (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Singularity direction of travel.
enum class Mode : std::uint8_t { leaving = 0, approaching = 1 };

inline std::string_view to_string(Mode m) {
  return m == Mode::approaching ? "approaching" : "leaving";
}

/// Cognitive-conflict class, ordered by severity.
enum class ConflictClass : std::uint8_t { none = 0, slow = 1, sudden = 2 };

inline constexpr std::size_t kConflictClassCount = 3;

inline std::string_view to_string(ConflictClass c) {
  switch (c) {
    case ConflictClass::none: return "none";
    case ConflictClass::slow: return "slow";
    case ConflictClass::sudden: return "sudden";
  }
  throw std::invalid_argument("unknown conflict class");
}

inline ConflictClass conflict_class_from_index(int i) {
  if (i < 0 || i > 2) throw std::invalid_argument("unknown conflict class index " + std::to_string(i));
  return static_cast<ConflictClass>(i);
}

inline ConflictClass parse_conflict_class(std::string_view s) {
  if (s == "none") return ConflictClass::none;
  if (s == "slow") return ConflictClass::slow;
  if (s == "sudden") return ConflictClass::sudden;
  throw std::invalid_argument("unknown conflict class '" + std::string(s) + "'");
}

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double norm2(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}

}  // namespace neuroadapt

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ssc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when a tensor or scalar stops being finite.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Raised by geometry routines that cannot operate on the given input
/// (fewer than three distinct points, all points collinear, ...).
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// Derives an independent, reproducible stream from a base seed and a
/// stream index (per-slide, per-tree, per-patch ...).
inline Rng derive_rng(std::uint64_t base_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed),
                    static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x55c0u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace ssc

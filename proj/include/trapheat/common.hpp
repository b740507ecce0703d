#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace trapheat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// CODATA 2018 exact / recommended values.
namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double elementary_charge = 1.602176634e-19;     // C
inline constexpr double hbar = 1.054571817e-34;                  // J s
inline constexpr double atomic_mass = 1.66053906660e-27;         // kg
}  // namespace constants

inline constexpr double sq(double x) { return x * x; }

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps ParamError/ConfigError/ParseError to exit
// code 2 and NumericalError/SizeError to exit code 3.

class TrapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid physical or geometric parameter; names the offending field.
class ParamError : public TrapError {
 public:
  ParamError(const std::string& field, const std::string& what)
      : TrapError(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Requested discretization cannot resolve a geometric feature.
class FeatureResolutionError : public ParamError {
 public:
  using ParamError::ParamError;
};

// Configuration file problem; message carries the section.key path.
class ConfigError : public TrapError {
 public:
  using TrapError::TrapError;
};

// Malformed input file; message carries line/offset.
class ParseError : public TrapError {
 public:
  using TrapError::TrapError;
};

// Solver / numerical pipeline failure.
class NumericalError : public TrapError {
 public:
  using TrapError::TrapError;
};

// Resource estimate exceeds a configured cap (raised before allocation).
class SizeError : public TrapError {
 public:
  using TrapError::TrapError;
};

// ---------------------------------------------------------------------------
// Deterministic reductions. All physics totals go through pairwise_sum so
// that results do not depend on chunking or thread count.

inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(std::span<const double> x) {
  return pairwise_sum(x.data(), x.size());
}

// FNV-1a 64-bit, used for artifact content hashes in manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace trapheat

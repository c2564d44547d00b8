#pragma once

// Fixed (non-learned) time encodings: unit-circle trig encoding, random Fourier
// features over (hour, minute), and Time2Vec.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "ticl/time_core.hpp"

namespace ticl {

inline std::pair<double, double> cyclic_encode(ClockTime t) {
  const double theta = 2.0 * std::numbers::pi * t.minute_of_day() / kMinutesPerDay;
  return {std::cos(theta), std::sin(theta)};
}

/// Inverse of cyclic_encode, rounded to the nearest minute. Throws on the zero vector.
inline ClockTime cyclic_decode(double c, double s) {
  if ((c == 0.0 && s == 0.0) || !std::isfinite(c) || !std::isfinite(s))
    throw ValidationError("cyclic_decode: undecodable point (" + std::to_string(c) + ", " +
                          std::to_string(s) + ")");
  double theta = std::atan2(s, c);
  if (theta < 0.0) theta += 2.0 * std::numbers::pi;
  const double minutes = theta * kMinutesPerDay / (2.0 * std::numbers::pi);
  return ClockTime::wrap(std::llround(minutes));
}

struct RffParams {
  int dim = 512;
  double sigma = 1.0;
  std::vector<double> projection;  // dim x 2, row-major; columns act on (hour, minute)
  std::vector<double> offsets;     // dim
};

inline RffParams make_rff(std::uint64_t seed, int dim = 512, double sigma = 1.0) {
  if (dim < 1) throw ValidationError("rff dim must be >= 1");
  if (!(sigma > 0.0)) throw ValidationError("rff sigma must be > 0");
  RffParams p;
  p.dim = dim;
  p.sigma = sigma;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> w(0.0, 1.0 / sigma);
  std::uniform_real_distribution<double> b(0.0, 2.0 * std::numbers::pi);
  p.projection.resize(static_cast<std::size_t>(dim) * 2);
  p.offsets.resize(static_cast<std::size_t>(dim));
  for (auto& v : p.projection) v = w(rng);
  for (auto& v : p.offsets) v = b(rng);
  return p;
}

/// z(x) = sqrt(2/D) cos(W x + b), x = (hour, minute).
inline std::vector<double> rff_encode(const RffParams& p, ClockTime t) {
  const double hour = t.hour();
  const double minute = t.minute();
  const double scale = std::sqrt(2.0 / p.dim);
  std::vector<double> out(static_cast<std::size_t>(p.dim));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double arg = p.projection[2 * i] * hour + p.projection[2 * i + 1] * minute + p.offsets[i];
    out[i] = scale * std::cos(arg);
  }
  return out;
}

struct Time2VecParams {
  std::vector<double> omegas;
  std::vector<double> phis;
  int dim() const { return static_cast<int>(omegas.size()); }
};

/// Linear term spans the day once; periodic terms are the daily harmonics
/// 1..dim-1 with seeded random phases.
inline Time2VecParams make_t2v(std::uint64_t seed, int dim = 64) {
  if (dim < 2) throw ValidationError("time2vec dim must be >= 2");
  Time2VecParams p;
  p.omegas.resize(static_cast<std::size_t>(dim));
  p.phis.resize(static_cast<std::size_t>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  p.omegas[0] = 1.0 / kMinutesPerDay;
  p.phis[0] = 0.0;
  for (int i = 1; i < dim; ++i) {
    p.omegas[static_cast<std::size_t>(i)] = 2.0 * std::numbers::pi * i / kMinutesPerDay;
    p.phis[static_cast<std::size_t>(i)] = phase(rng);
  }
  return p;
}

/// Entry 0 is omega_0 t + phi_0; entries i >= 1 are sin(omega_i t + phi_i). t in minutes.
inline std::vector<double> t2v_encode(const Time2VecParams& p, double minutes) {
  std::vector<double> out(p.omegas.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double arg = p.omegas[i] * minutes + p.phis[i];
    out[i] = i == 0 ? arg : std::sin(arg);
  }
  return out;
}

inline std::vector<double> t2v_encode(const Time2VecParams& p, ClockTime t) {
  return t2v_encode(p, static_cast<double>(t.minute_of_day()));
}

}  // namespace ticl

#pragma once

// Synthetic precomputed-feature datasets with planted time-of-day structure.
//
// A record with true time t (theta = 2*pi*t/1440) gets two kinds of dims:
//  - unambiguous dims d respond to the unit-circle point (cos theta, sin theta)
//    through a tuning curve around a prototype direction phi_d:
//        a_d * exp(kappa * ((cos theta, sin theta) . (cos phi_d, sin phi_d) - 1))
//  - confuser dims carry a_d * |sin(pi t / 1440)|, which is identical for t and
//    its solar mirror 1440 - t (sunrise/sunset look alike).
// Gaussian noise is added to every dim afterwards.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ticl/time_core.hpp"

namespace ticl {

struct SynthSpec {
  int samples_per_class = 200;
  int num_classes = 24;
  int dim = 32;
  double noise_sigma = 0.05;
  double confuser_strength = 0.2;  // fraction of dims that are confusers
  std::vector<double> skew;        // optional per-class multipliers on samples_per_class
  double tuning_kappa = 4.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (samples_per_class < 1) throw ValidationError("samples per class must be >= 1");
    if (dim < 4) throw ValidationError("synthetic dim must be >= 4");
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
    if (!(confuser_strength >= 0.0 && confuser_strength <= 1.0))
      throw ValidationError("confuser strength must be in [0, 1]");
    if (!(tuning_kappa > 0.0)) throw ValidationError("tuning kappa must be > 0");
    (void)TimeLabelSpace(num_classes);
    if (!skew.empty()) {
      if (static_cast<int>(skew.size()) != num_classes)
        throw ValidationError("skew must have one weight per class");
      for (double w : skew)
        if (!(w >= 0.0)) throw ValidationError("skew weights must be >= 0");
    }
  }

  int class_count(int c) const {
    if (skew.empty()) return samples_per_class;
    return static_cast<int>(std::llround(samples_per_class * skew[static_cast<std::size_t>(c)]));
  }

  int confuser_dims() const { return static_cast<int>(std::lround(confuser_strength * dim)); }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Noise-free feature vector for minute `t` under the per-dimension layout of `spec`.
struct SynthLayout {
  std::vector<double> amplitude;
  std::vector<double> prototype;  // angle per unambiguous dim
  int unambiguous = 0;
  double kappa = 3.0;

  static SynthLayout from(const SynthSpec& spec) {
    SynthLayout l;
    l.kappa = spec.tuning_kappa;
    l.unambiguous = spec.dim - spec.confuser_dims();
    std::mt19937_64 rng(detail::splitmix64(spec.seed));
    std::uniform_real_distribution<double> amp(1.0, 2.0);
    std::uniform_real_distribution<double> rot(0.0, 2.0 * std::numbers::pi);
    const double phase0 = rot(rng);
    for (int d = 0; d < spec.dim; ++d) l.amplitude.push_back(amp(rng));
    for (int d = 0; d < l.unambiguous; ++d)
      l.prototype.push_back(phase0 + 2.0 * std::numbers::pi * (d + 0.5) / l.unambiguous);
    return l;
  }

  std::vector<double> clean(int minute) const {
    const double theta = 2.0 * std::numbers::pi * minute / kMinutesPerDay;
    const double c = std::cos(theta), s = std::sin(theta);
    // fold to the mirror-invariant representative so t and 1440 - t agree bit-for-bit
    const int folded = std::min(minute, (kMinutesPerDay - minute) % kMinutesPerDay);
    const double mirror = std::sin(std::numbers::pi * folded / kMinutesPerDay);
    std::vector<double> f(amplitude.size());
    for (std::size_t d = 0; d < f.size(); ++d) {
      if (static_cast<int>(d) < unambiguous) {
        const double dot = c * std::cos(prototype[d]) + s * std::sin(prototype[d]);
        f[d] = amplitude[d] * std::exp(kappa * (dot - 1.0));
      } else {
        f[d] = amplitude[d] * mirror;
      }
    }
    return f;
  }
};

inline Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const SynthLayout layout = SynthLayout::from(spec);
  const TimeLabelSpace space(spec.num_classes);
  const int width = space.bin_minutes();

  std::mt19937_64 anchor_rng(detail::splitmix64(spec.seed ^ 0xa11c0de5ULL));
  std::uniform_real_distribution<double> lat_anchor(-60.0, 60.0);
  std::uniform_real_distribution<double> lon_anchor(-170.0, 170.0);

  Dataset ds;
  ds.dim = spec.dim;
  for (int c = 0; c < spec.num_classes; ++c) {
    const double lat_c = lat_anchor(anchor_rng);
    const double lon_c = lon_anchor(anchor_rng);
    std::mt19937_64 rng(detail::splitmix64(spec.seed * 1000003ULL + static_cast<std::uint64_t>(c) + 1));
    std::uniform_int_distribution<int> minute(c * width, (c + 1) * width - 1);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::normal_distribution<double> geo(0.0, 0.5);
    std::uniform_int_distribution<int> month(1, 12);
    std::uniform_int_distribution<int> day(1, 28);
    const int n = spec.class_count(c);
    for (int i = 0; i < n; ++i) {
      FeatureRecord r;
      const int t = minute(rng);
      r.id = "synth-c" + std::to_string(c) + "-" + std::to_string(i);
      r.time = ClockTime(t);
      r.features = layout.clean(t);
      for (double& v : r.features) v += spec.noise_sigma * noise(rng);
      r.lat = std::clamp(lat_c + geo(rng), -90.0, 90.0);
      r.lon = std::clamp(lon_c + geo(rng), -180.0, 180.0);
      const int mo = month(rng), dd = day(rng);
      r.date = "2023-" + std::string(mo < 10 ? "0" : "") + std::to_string(mo) + "-" +
               std::string(dd < 10 ? "0" : "") + std::to_string(dd);
      const double daylight = std::max(0.0, -std::cos(2.0 * std::numbers::pi * t / kMinutesPerDay));
      r.brightness = std::clamp(20.0 + 200.0 * daylight + 5.0 * noise(rng), 0.0, 255.0);
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

/// Per-hour sampling weights with a daytime peak and sparse nights.
inline std::vector<double> day_heavy_skew(int num_classes) {
  const TimeLabelSpace space(num_classes);
  std::vector<double> w;
  for (int c = 0; c < num_classes; ++c) {
    const int hour = class_midpoint(c, space).hour();
    if (hour >= 7 && hour <= 17) w.push_back(1.0);
    else if (hour >= 5 && hour <= 20) w.push_back(0.5);
    else w.push_back(0.12);
  }
  return w;
}

inline std::map<std::string, SynthSpec> standard_suites() {
  SynthSpec separable;
  separable.seed = 1;

  SynthSpec confuser = separable;
  confuser.confuser_strength = 0.9;
  confuser.seed = 2;

  SynthSpec skewed = separable;
  skewed.skew = day_heavy_skew(skewed.num_classes);
  skewed.seed = 3;

  return {{"separable", separable}, {"confuser", confuser}, {"skewed", skewed}};
}

inline SynthSpec suite(const std::string& name) {
  const auto suites = standard_suites();
  const auto it = suites.find(name);
  if (it == suites.end())
    throw ValidationError("unknown synthetic suite '" + name + "' (expected separable|confuser|skewed)");
  return it->second;
}

}  // namespace ticl

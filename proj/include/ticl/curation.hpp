#pragma once

// Dataset curation operators: illumination/night checks, block SNR, per-hour
// DBSCAN outlier scan, stratified splitting and UTC-to-local approximation.
// Nothing here deletes data; operators emit flags or review lists.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ticl/model.hpp"
#include "ticl/time_core.hpp"

namespace ticl {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major, values in [0, 255]

  GrayImage() = default;
  GrayImage(int w, int h, std::vector<double> px) : width(w), height(h), pixels(std::move(px)) {
    if (w < 0 || h < 0 || pixels.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
      throw ValidationError("gray image: pixel count " + std::to_string(pixels.size()) +
                            " != " + std::to_string(w) + "x" + std::to_string(h));
  }

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

inline double mean_brightness(const GrayImage& img) {
  if (img.pixels.empty()) throw ValidationError("mean_brightness: empty image");
  return std::accumulate(img.pixels.begin(), img.pixels.end(), 0.0) / static_cast<double>(img.pixels.size());
}

// ---------------------------------------------------------------------------
// Night illumination check

struct NightFilter {
  std::vector<int> night_hours{22, 23, 0, 1, 2, 3};  // local clock hours
  double brightness_threshold = 100.0;
  double polar_latitude = 75.0;  // |lat| >= this keeps the record regardless of light
};

enum class CurationFlag { keep, review };

inline std::string to_string(CurationFlag f) { return f == CurationFlag::keep ? "keep" : "review"; }

/// review iff night hour, bright (>= threshold) and not polar; a missing latitude
/// cannot prove the polar exception and so counts as non-polar.
inline CurationFlag night_brightness_flag(const FeatureRecord& r, const NightFilter& f = {}) {
  if (!r.brightness) throw ValidationError("record '" + r.id + "': night filter needs brightness");
  const bool night = std::find(f.night_hours.begin(), f.night_hours.end(), r.time.hour()) != f.night_hours.end();
  const bool bright = *r.brightness >= f.brightness_threshold;
  const bool polar = r.lat && std::abs(*r.lat) >= f.polar_latitude;
  return night && bright && !polar ? CurationFlag::review : CurationFlag::keep;
}

// ---------------------------------------------------------------------------
// Block-based SNR

inline constexpr int kSnrBlock = 16;
inline constexpr double kSnrNoiseQuantile = 0.10;
inline constexpr double kSnrDiscardDb = 15.0;

class SnrError : public std::runtime_error {
public:
  enum class Kind { noiseless, no_signal, too_small };
  SnrError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

struct SnrReport {
  double snr_db = 0.0;
  double noise_var = 0.0;
  double signal_var = 0.0;
  double total_var = 0.0;
  int blocks_used = 0;   // blocks averaged into the noise estimate
  int blocks_total = 0;

  /// Images at or below the threshold are discarded.
  bool discard(double threshold_db = kSnrDiscardDb) const { return snr_db <= threshold_db; }
};

namespace detail {

inline double population_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

}  // namespace detail

/// Noise floor = mean variance of the lowest ceil(10%) full 16x16 blocks
/// (partial edge blocks dropped); signal = total - noise; SNR in dB.
inline SnrReport snr_estimate(const GrayImage& img) {
  if (img.width < kSnrBlock || img.height < kSnrBlock)
    throw SnrError(SnrError::Kind::too_small, "snr_estimate: image smaller than one 16x16 block");
  std::vector<double> block_vars;
  std::vector<double> block(static_cast<std::size_t>(kSnrBlock * kSnrBlock));
  for (int by = 0; by + kSnrBlock <= img.height; by += kSnrBlock) {
    for (int bx = 0; bx + kSnrBlock <= img.width; bx += kSnrBlock) {
      std::size_t k = 0;
      for (int y = by; y < by + kSnrBlock; ++y)
        for (int x = bx; x < bx + kSnrBlock; ++x) block[k++] = img.at(x, y);
      block_vars.push_back(detail::population_variance(block));
    }
  }
  std::sort(block_vars.begin(), block_vars.end());
  SnrReport rep;
  rep.blocks_total = static_cast<int>(block_vars.size());
  rep.blocks_used = std::max(1, static_cast<int>(std::ceil(kSnrNoiseQuantile * rep.blocks_total)));
  rep.noise_var = std::accumulate(block_vars.begin(), block_vars.begin() + rep.blocks_used, 0.0) / rep.blocks_used;
  rep.total_var = detail::population_variance(img.pixels);
  rep.signal_var = rep.total_var - rep.noise_var;
  if (rep.noise_var == 0.0)
    throw SnrError(SnrError::Kind::noiseless, "snr_estimate: noiseless image (noise variance 0)");
  if (rep.signal_var <= 0.0)
    throw SnrError(SnrError::Kind::no_signal, "snr_estimate: no signal (signal variance <= 0)");
  rep.snr_db = 10.0 * std::log10(rep.signal_var / rep.noise_var);
  return rep;
}

// ---------------------------------------------------------------------------
// DBSCAN

struct DbscanConfig {
  double epsilon = 10.0;
  int min_pts = 100;

  void validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("dbscan epsilon must be > 0");
    if (min_pts < 1) throw ValidationError("dbscan min_pts must be >= 1");
  }
};

inline constexpr int kNoise = -1;

/// Euclidean DBSCAN over the rows of `points`. A point is core when at least
/// min_pts points (itself included) lie within distance <= epsilon. Clusters are
/// numbered in scan order; a border point joins the first cluster that reaches it.
inline std::vector<int> dbscan(const Matrix& points, const DbscanConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(points.rows());
  const double eps2 = cfg.epsilon * cfg.epsilon;
  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if ((points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm() <= eps2)
        out.push_back(j);
    return out;
  };
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    auto seeds = neighbours(i);
    if (static_cast<int>(seeds.size()) < cfg.min_pts) {
      label[i] = kNoise;
      continue;
    }
    label[i] = cluster;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) label[q] = cluster;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      auto nq = neighbours(q);
      if (static_cast<int>(nq.size()) >= cfg.min_pts) queue.insert(queue.end(), nq.begin(), nq.end());
    }
    ++cluster;
  }
  return label;
}

enum class OutlierStatus { majority, outlier };

struct OutlierFlag {
  std::size_t record = 0;
  int hour = 0;
  int cluster = kNoise;
  OutlierStatus status = OutlierStatus::outlier;
};

/// DBSCAN within each local hour; the largest cluster of an hour is the majority
/// group (ties: lowest cluster id), everything else is flagged for review.
/// Hours without records produce no output.
inline std::vector<OutlierFlag> hourly_outlier_scan(const Dataset& ds, const DbscanConfig& cfg) {
  cfg.validate();
  std::array<std::vector<std::size_t>, 24> buckets;
  for (std::size_t i = 0; i < ds.size(); ++i) buckets[static_cast<std::size_t>(ds.records[i].time.hour())].push_back(i);
  std::vector<OutlierFlag> out;
  for (int h = 0; h < 24; ++h) {
    const auto& rows = buckets[static_cast<std::size_t>(h)];
    if (rows.empty()) continue;
    const auto labels = dbscan(features_matrix(ds, rows), cfg);
    std::map<int, std::size_t> sizes;
    for (int l : labels)
      if (l != kNoise) ++sizes[l];
    int majority = kNoise;
    std::size_t best = 0;
    for (const auto& [l, s] : sizes)
      if (s > best) {
        best = s;
        majority = l;
      }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const bool in_major = majority != kNoise && labels[k] == majority;
      out.push_back({rows[k], h, labels[k], in_major ? OutlierStatus::majority : OutlierStatus::outlier});
    }
  }
  std::sort(out.begin(), out.end(), [](const OutlierFlag& a, const OutlierFlag& b) { return a.record < b.record; });
  return out;
}

// ---------------------------------------------------------------------------
// Stratified split

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Parses "A:B" (train:test) into the test fraction B/(A+B).
inline double parse_split_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("ratio '" + text + "': expected TRAIN:TEST, e.g. 9:1");
  double a = 0.0, b = 0.0;
  try {
    std::size_t pa = 0, pb = 0;
    a = std::stod(text.substr(0, colon), &pa);
    b = std::stod(text.substr(colon + 1), &pb);
    if (pa != colon || pb != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("ratio '" + text + "': parts must be numbers");
  }
  if (!(a >= 0.0) || !(b >= 0.0) || !(a + b > 0.0))
    throw ValidationError("ratio '" + text + "': parts must be non-negative with a positive sum");
  return b / (a + b);
}

/// Per-class seeded shuffle; each class gets floor(n*f) test items, and the
/// leftover needed to reach round(N*f) overall goes to the classes with the
/// largest fractional remainders (ties: lower class). Index lists are ascending.
inline SplitIndices stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed,
                                     const TimeLabelSpace& space) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw ValidationError("test fraction must be in [0, 1]");
  const int c = space.num_classes();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(label_of(ds.records[i], space))].push_back(i);

  std::vector<std::size_t> quota(static_cast<std::size_t>(c));
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (int k = 0; k < c; ++k) {
    const double exact = test_fraction * static_cast<double>(by_class[static_cast<std::size_t>(k)].size());
    quota[static_cast<std::size_t>(k)] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[static_cast<std::size_t>(k)];
    remainders.push_back({exact - std::floor(exact), k});
  }
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [rem, k] : remainders) {
    if (assigned >= target) break;
    if (rem > 0.0) {
      ++quota[static_cast<std::size_t>(k)];
      ++assigned;
    }
  }

  SplitIndices out;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < c; ++k) {
    auto members = by_class[static_cast<std::size_t>(k)];
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t q = quota[static_cast<std::size_t>(k)];
    out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(q));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(q), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.dim = ds.dim;
  out.records.reserve(rows.size());
  for (std::size_t r : rows) out.records.push_back(ds.records[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Time zone approximation and brightness statistics

/// Local clock time from UTC using a whole-hour offset round(lon / 15).
inline ClockTime utc_to_local_approx(ClockTime utc, double lon) {
  if (!(lon >= -180.0 && lon <= 180.0)) throw ValidationError("lon outside [-180, 180]");
  const long long offset = std::llround(lon / 15.0);
  return ClockTime::wrap(utc.minute_of_day() + 60 * offset);
}

struct HourBrightness {
  int hour = 0;
  std::size_t count = 0;  // 0 marks an empty hour
  double mean = 0.0;
  double stddev = 0.0;    // population
};

inline std::array<HourBrightness, 24> brightness_by_hour(const Dataset& ds) {
  std::array<std::vector<double>, 24> values;
  for (const auto& r : ds.records)
    if (r.brightness) values[static_cast<std::size_t>(r.time.hour())].push_back(*r.brightness);
  std::array<HourBrightness, 24> out;
  for (int h = 0; h < 24; ++h) {
    const auto& v = values[static_cast<std::size_t>(h)];
    auto& row = out[static_cast<std::size_t>(h)];
    row.hour = h;
    row.count = v.size();
    if (v.empty()) continue;
    row.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    row.stddev = std::sqrt(detail::population_variance(v));
  }
  return out;
}

}  // namespace ticl

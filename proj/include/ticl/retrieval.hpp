#pragma once

// Exact cosine search over adapted embeddings: the gallery used by
// nearest-neighbour inference and by time-based image retrieval.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ticl/inference.hpp"
#include "ticl/model.hpp"
#include "ticl/time_core.hpp"

namespace ticl {

struct GalleryEntry {
  std::string id;
  ClockTime time;
  std::optional<double> lat;
  std::optional<double> lon;
};

class GalleryIndex {
public:
  GalleryIndex() = default;

  GalleryIndex(Matrix embeddings, std::vector<GalleryEntry> entries)
      : embeddings_(std::move(embeddings)), entries_(std::move(entries)) {
    if (static_cast<std::size_t>(embeddings_.rows()) != entries_.size())
      throw std::invalid_argument("gallery: metadata length does not match embedding rows");
    for (Eigen::Index i = 0; i < embeddings_.rows(); ++i)
      if (std::abs(embeddings_.row(i).norm() - 1.0) > 1e-9)
        throw std::invalid_argument("gallery: row " + std::to_string(i) + " is not unit-norm");
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Matrix& embeddings() const { return embeddings_; }
  const GalleryEntry& entry(std::size_t i) const { return entries_[i]; }

private:
  Matrix embeddings_;
  std::vector<GalleryEntry> entries_;
};

inline GalleryIndex build_index(const ModelParams& p, const Dataset& ds) {
  std::vector<GalleryEntry> entries;
  entries.reserve(ds.size());
  for (const auto& r : ds.records) entries.push_back({r.id, r.time, r.lat, r.lon});
  Matrix emb = ds.empty() ? Matrix(0, p.config.embed_dim) : image_embed_batch(p, features_matrix(ds));
  return GalleryIndex(std::move(emb), std::move(entries));
}

struct Hit {
  std::size_t index = 0;
  double similarity = 0.0;
};

/// Exact top-k by descending cosine similarity, ties by ascending gallery index.
/// Entries whose id equals `exclude_id` are skipped.
inline std::vector<Hit> search(const GalleryIndex& index, const Vector& embedding, std::size_t k,
                               const std::string* exclude_id = nullptr) {
  const Vector sims = index.embeddings() * embedding;
  std::vector<Hit> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude_id && index.entry(i).id == *exclude_id) continue;
    all.push_back({i, sims(static_cast<Eigen::Index>(i))});
  }
  const auto better = [](const Hit& a, const Hit& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index);
  };
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
  all.resize(n);
  return all;
}

inline std::vector<Hit> query(const GalleryIndex& index, std::span<const double> features,
                              const ModelParams& p, std::size_t k) {
  return search(index, image_embed(p, features), k);
}

/// Neighbours' classes in neighbour order with duplicates collapsed; the time is
/// the midpoint of the nearest neighbour's class.
inline Prediction knn_from_hits(const GalleryIndex& index, std::span<const Hit> hits,
                                const TimeLabelSpace& space, int k) {
  if (hits.empty()) throw ValidationError("knn_predict: empty gallery");
  Prediction pred;
  for (const auto& h : hits) {
    const int c = class_of(index.entry(h.index).time, space);
    if (std::find(pred.ranked.begin(), pred.ranked.end(), c) == pred.ranked.end())
      pred.ranked.push_back(c);
    if (static_cast<int>(pred.ranked.size()) >= k) break;
  }
  pred.time = class_midpoint(pred.ranked.front(), space);
  return pred;
}

inline Prediction knn_predict(const GalleryIndex& index, std::span<const double> features,
                              const ModelParams& p, const TimeLabelSpace& space, int k) {
  if (index.empty()) throw ValidationError("knn_predict: empty gallery");
  if (k < 1) throw ValidationError("k must be >= 1");
  const auto hits = search(index, image_embed(p, features), index.size());
  return knn_from_hits(index, hits, space, k);
}

inline std::vector<Prediction> knn_predict_all(const GalleryIndex& index, const Dataset& queries,
                                               const ModelParams& p, const TimeLabelSpace& space, int k) {
  if (index.empty()) throw ValidationError("knn_predict: empty gallery");
  if (queries.empty()) return {};
  const Matrix emb = image_embed_batch(p, features_matrix(queries));
  std::vector<Prediction> out;
  out.reserve(queries.size());
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const auto hits = search(index, emb.row(i).transpose(), index.size());
    out.push_back(knn_from_hits(index, hits, space, k));
  }
  return out;
}

/// Ranked hits for every query record; optionally skips gallery items sharing the query's id.
inline std::vector<std::vector<Hit>> retrieve_all(const GalleryIndex& index, const Dataset& queries,
                                                  const ModelParams& p, std::size_t top_n,
                                                  bool exclude_same_id = false) {
  std::vector<std::vector<Hit>> out;
  if (queries.empty()) return out;
  const Matrix emb = image_embed_batch(p, features_matrix(queries));
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const std::string* skip = exclude_same_id ? &queries.records[static_cast<std::size_t>(i)].id : nullptr;
    out.push_back(search(index, emb.row(i).transpose(), top_n, skip));
  }
  return out;
}

inline constexpr int kRetrievalPositiveMinutes = 30;
inline constexpr double kJointGeoL1Degrees = 0.01;

/// Fraction of queries with a positive (within 30 min) among their first k hits.
inline double recall_at_k(const GalleryIndex& index, std::span<const std::vector<Hit>> results,
                          const Dataset& queries, std::size_t k) {
  if (results.size() != queries.size()) throw std::invalid_argument("recall_at_k: length mismatch");
  if (queries.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto& r = results[q];
    const std::size_t n = std::min(k, r.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (circular_diff(index.entry(r[i].index).time, queries.records[q].time) <= kRetrievalPositiveMinutes) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

inline double recall_at_k(const GalleryIndex& index, const Dataset& queries, const ModelParams& p,
                          std::size_t k, bool exclude_same_id = false) {
  const auto results = retrieve_all(index, queries, p, k, exclude_same_id);
  return recall_at_k(index, results, queries, k);
}

struct TimeHistogram {
  static constexpr int kBinMinutes = 30;
  static constexpr int kBins = 24;  // [0,30), ..., [690,720]
  std::vector<long long> counts = std::vector<long long>(kBins, 0);

  void add(int minutes) { ++counts[static_cast<std::size_t>(std::min(minutes / kBinMinutes, kBins - 1))]; }
  long long total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }
};

struct GeoHistogram {
  // L1 degree distance bins [e_i, e_{i+1}), last bin open-ended
  std::vector<double> edges{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  std::vector<long long> counts = std::vector<long long>(7, 0);
  long long excluded = 0;  // pairs lacking lat/lon on either side

  void add(double l1) {
    std::size_t bin = 0;
    while (bin + 1 < edges.size() && l1 >= edges[bin + 1]) ++bin;
    ++counts[bin];
  }
  long long total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }
};

inline std::optional<double> geo_l1(std::optional<double> lat_a, std::optional<double> lon_a,
                                    std::optional<double> lat_b, std::optional<double> lon_b) {
  if (!lat_a || !lon_a || !lat_b || !lon_b) return std::nullopt;
  return std::abs(*lat_a - *lat_b) + std::abs(*lon_a - *lon_b);
}

struct ErrorDistributions {
  TimeHistogram time;
  GeoHistogram geo;
};

inline ErrorDistributions error_distributions(const GalleryIndex& index,
                                              std::span<const std::vector<Hit>> results,
                                              const Dataset& queries) {
  if (results.size() != queries.size()) throw std::invalid_argument("error_distributions: length mismatch");
  ErrorDistributions out;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const auto& qr = queries.records[q];
    for (const auto& h : results[q]) {
      const auto& e = index.entry(h.index);
      out.time.add(circular_diff(e.time, qr.time));
      if (const auto d = geo_l1(e.lat, e.lon, qr.lat, qr.lon)) out.geo.add(*d);
      else ++out.geo.excluded;
    }
  }
  return out;
}

inline ErrorDistributions error_distributions(const GalleryIndex& index, const Dataset& queries,
                                              const ModelParams& p, std::size_t top_n = 100,
                                              bool exclude_same_id = false) {
  const auto results = retrieve_all(index, queries, p, top_n, exclude_same_id);
  return error_distributions(index, results, queries);
}

/// Fraction of queries whose top-1 hit is within 0.01 deg (L1) and 30 min.
inline double joint_geo_time_hit(const GalleryIndex& index, std::span<const std::vector<Hit>> results,
                                 const Dataset& queries) {
  if (results.size() != queries.size()) throw std::invalid_argument("joint_geo_time_hit: length mismatch");
  if (queries.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    if (results[q].empty()) continue;
    const auto& e = index.entry(results[q].front().index);
    const auto& qr = queries.records[q];
    const auto d = geo_l1(e.lat, e.lon, qr.lat, qr.lon);
    if (d && *d <= kJointGeoL1Degrees && circular_diff(e.time, qr.time) <= kRetrievalPositiveMinutes) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

inline double joint_geo_time_hit(const GalleryIndex& index, const Dataset& queries,
                                 const ModelParams& p, bool exclude_same_id = false) {
  const auto results = retrieve_all(index, queries, p, 1, exclude_same_id);
  return joint_geo_time_hit(index, results, queries);
}

struct RetrievalReport {
  std::map<std::size_t, double> recall_at_k;
  ErrorDistributions errors;
  double joint_hit_rate = 0.0;
};

inline RetrievalReport evaluate_retrieval(const GalleryIndex& index, const Dataset& queries,
                                          const ModelParams& p, std::span<const std::size_t> ks,
                                          std::size_t top_n = 100, bool exclude_same_id = false) {
  std::size_t depth = top_n;
  for (std::size_t k : ks) depth = std::max(depth, k);
  const auto results = retrieve_all(index, queries, p, depth, exclude_same_id);
  RetrievalReport rep;
  for (std::size_t k : ks) rep.recall_at_k[k] = recall_at_k(index, results, queries, k);
  std::vector<std::vector<Hit>> top(results.size());
  for (std::size_t q = 0; q < results.size(); ++q)
    top[q].assign(results[q].begin(),
                  results[q].begin() + static_cast<std::ptrdiff_t>(std::min(top_n, results[q].size())));
  rep.errors = error_distributions(index, top, queries);
  rep.joint_hit_rate = joint_geo_time_hit(index, results, queries);
  return rep;
}

}  // namespace ticl

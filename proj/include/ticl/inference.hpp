#pragma once

// Classification and nearest-neighbour inference, plus evaluation metrics.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ticl/model.hpp"
#include "ticl/time_core.hpp"

namespace ticl {

struct Prediction {
  std::vector<int> ranked;  // distinct classes, best first
  ClockTime time;           // midpoint of the top-1 class
};

/// Indices sorted by descending score; equal scores keep ascending index order.
inline std::vector<int> rank_descending(const Vector& scores) {
  std::vector<int> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return idx;
}

/// Ranks classes of `space` against a precomputed unit image embedding.
inline Prediction classify_embedding(const Vector& image, const Matrix& table,
                                     const TimeLabelSpace& space, int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (table.rows() != space.num_classes())
    throw std::invalid_argument("class table rows do not match the label space");
  Prediction pred;
  pred.ranked = rank_descending(table * image);
  pred.ranked.resize(std::min<std::size_t>(pred.ranked.size(), static_cast<std::size_t>(k)));
  pred.time = class_midpoint(pred.ranked.front(), space);
  return pred;
}

inline Prediction classify(const ModelParams& p, std::span<const double> features,
                           const TimeLabelSpace& space, int k) {
  if (k > space.num_classes())
    throw ValidationError("k=" + std::to_string(k) + " exceeds class count " +
                          std::to_string(space.num_classes()));
  return classify_embedding(image_embed(p, features), class_embedding_table(p, space), space, k);
}

/// Batched classification of every record; the class table is computed once.
inline std::vector<Prediction> classify_all(const ModelParams& p, const Dataset& ds,
                                            const TimeLabelSpace& space, int k) {
  if (ds.empty()) return {};
  const Matrix table = class_embedding_table(p, space);
  const Matrix emb = image_embed_batch(p, features_matrix(ds));
  std::vector<Prediction> out;
  out.reserve(ds.size());
  for (Eigen::Index i = 0; i < emb.rows(); ++i)
    out.push_back(classify_embedding(emb.row(i).transpose(), table, space, k));
  return out;
}

/// Top-k fraction: ground truth among the first k ranked classes.
inline double topk_accuracy(std::span<const Prediction> preds, std::span<const int> labels, int k) {
  if (preds.size() != labels.size()) throw std::invalid_argument("topk_accuracy: length mismatch");
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& r = preds[i].ranked;
    const auto end = r.begin() + std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(r.size()));
    if (std::find(r.begin(), end, labels[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

/// Mean circular difference in minutes.
inline double time_mae(std::span<const ClockTime> pred, std::span<const ClockTime> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("time_mae: length mismatch");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += circular_diff(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

/// Row = ground truth, column = prediction.
inline std::vector<std::vector<long long>> confusion_matrix(std::span<const int> pred,
                                                            std::span<const int> gt, int num_classes) {
  if (pred.size() != gt.size()) throw std::invalid_argument("confusion_matrix: length mismatch");
  std::vector<std::vector<long long>> m(static_cast<std::size_t>(num_classes),
                                        std::vector<long long>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] < 0 || gt[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw std::out_of_range("confusion_matrix: class outside [0, C)");
    ++m[static_cast<std::size_t>(gt[i])][static_cast<std::size_t>(pred[i])];
  }
  return m;
}

inline constexpr int kHourHitMinutes = 30;

/// Fraction of predictions within 30 minutes (circular) of ground truth.
inline double hour_accuracy(std::span<const ClockTime> pred, std::span<const ClockTime> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("hour_accuracy: length mismatch");
  if (pred.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (circular_diff(pred[i], gt[i]) <= kHourHitMinutes) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Error floor from replacing each timestamp by its class midpoint.
inline double observational_error(std::span<const ClockTime> gt, const TimeLabelSpace& space) {
  if (gt.empty()) return 0.0;
  double sum = 0.0;
  for (ClockTime t : gt) sum += circular_diff(t, class_midpoint(class_of(t, space), space));
  return sum / static_cast<double>(gt.size());
}

/// softmax_i( ext . T_i ) over the class table (no temperature).
inline Vector class_affinity(const ModelParams& p, const Vector& external, const TimeLabelSpace& space) {
  const Matrix table = class_embedding_table(p, space);
  if (external.size() != table.cols())
    throw ValidationError("external embedding dim " + std::to_string(external.size()) +
                          " != K=" + std::to_string(table.cols()));
  if (!external.allFinite()) throw ValidationError("external embedding has non-finite values");
  const Vector logits = table * external;
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Population variance per dimension across frames, averaged over dimensions.
inline double intra_video_variance(const Matrix& frames) {
  if (frames.rows() < 1) throw std::invalid_argument("intra_video_variance: no frames");
  const Eigen::RowVectorXd mean = frames.colwise().mean();
  const Matrix centered = frames.rowwise() - mean;
  return centered.array().square().colwise().mean().mean();
}

/// 1 - cos(adapted image embedding, target class embedding); in [0, 2].
inline double time_guidance_loss(const ModelParams& p, std::span<const double> features,
                                 int target_class, const TimeLabelSpace& space) {
  const Vector img = image_embed(p, features);
  const Vector tgt = time_embed(p, space, target_class);
  return 1.0 - img.dot(tgt);
}

struct EvalReport {
  double top1 = 0.0;
  double top3 = 0.0;
  double top5 = 0.0;
  double time_mae_minutes = 0.0;
  double hour_accuracy = 0.0;
  std::size_t samples = 0;
  std::vector<std::vector<long long>> confusion;
};

inline EvalReport evaluate(std::span<const Prediction> preds, std::span<const int> labels,
                           std::span<const ClockTime> gt_times, const TimeLabelSpace& space) {
  if (preds.size() != labels.size() || preds.size() != gt_times.size())
    throw std::invalid_argument("evaluate: length mismatch");
  EvalReport rep;
  rep.samples = preds.size();
  rep.top1 = topk_accuracy(preds, labels, 1);
  rep.top3 = topk_accuracy(preds, labels, 3);
  rep.top5 = topk_accuracy(preds, labels, 5);
  std::vector<ClockTime> pt;
  std::vector<int> top1;
  for (const auto& p : preds) {
    pt.push_back(p.time);
    top1.push_back(p.ranked.front());
  }
  rep.time_mae_minutes = time_mae(pt, gt_times);
  rep.hour_accuracy = hour_accuracy(pt, gt_times);
  rep.confusion = confusion_matrix(top1, labels, space.num_classes());
  return rep;
}

}  // namespace ticl

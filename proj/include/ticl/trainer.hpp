#pragma once

// Contrastive objective, analytic gradients, Adam, and the training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ticl/model.hpp"

namespace ticl {

struct TrainConfig {
  double lr0 = 5e-4;
  double weight_decay = 1e-6;
  int epochs = 20;
  int batch_size = 512;
  int halve_every = 2;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::class_table;

  void validate() const {
    if (!(lr0 > 0.0)) throw ValidationError("lr0 must be > 0");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (halve_every < 1) throw ValidationError("halve-every must be >= 1");
  }
};

namespace detail {

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double m = row.maxCoeff();
  return m + std::log((row.array() - m).exp().sum());
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite values");
}

/// Sum over rows of -log softmax(logits)[target]; writes softmax(logits) - onehot(target) to `d`.
inline double softmax_xent(const Matrix& logits, std::span<const int> targets, Matrix* d) {
  double loss = 0.0;
  if (d) d->resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double lse = log_sum_exp(logits.row(i));
    const int t = targets[static_cast<std::size_t>(i)];
    loss += lse - logits(i, t);
    if (d) {
      d->row(i) = (logits.row(i).array() - lse).exp().matrix();
      (*d)(i, t) -= 1.0;
    }
  }
  return loss;
}

}  // namespace detail

/// L = -sum_i log( exp(I_i.T_i/tau) / sum_j exp(I_i.T_j/tau) ), rows of I and T paired.
inline double infonce_loss(const Matrix& images, const Matrix& targets, double tau) {
  if (images.rows() < 1 || images.rows() != targets.rows() || images.cols() != targets.cols())
    throw std::invalid_argument("infonce_loss: I and T must be non-empty with equal shapes");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("infonce_loss: tau must be > 0");
  detail::require_finite(images, "infonce_loss: I");
  detail::require_finite(targets, "infonce_loss: T");
  const Matrix logits = images * targets.transpose() / tau;
  std::vector<int> diag(static_cast<std::size_t>(images.rows()));
  std::iota(diag.begin(), diag.end(), 0);
  return detail::softmax_xent(logits, diag, nullptr);
}

struct LossGrads {
  double loss = 0.0;      // summed over the batch
  ModelParams grads;      // d loss / d param, same shapes as the params
  bool degenerate = false;  // batch mode with a single distinct class
};

/// Forward + exact backward of the contrastive loss for one batch.
///
/// class_table: each image is scored against all C class embeddings.
/// batch: each image is scored against the batch's own target embeddings
/// (duplicate classes in the batch stay in the denominator).
inline LossGrads loss_and_grads(const ModelParams& p, const Matrix& features,
                                std::span<const int> labels, LossMode mode) {
  const auto batch = features.rows();
  if (batch < 1) throw std::invalid_argument("loss_and_grads: empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != batch)
    throw std::invalid_argument("loss_and_grads: labels/features length mismatch");
  detail::require_finite(features, "loss_and_grads: features");
  const auto& space = p.config.space;
  for (int y : labels)
    if (y < 0 || y >= space.num_classes())
      throw std::out_of_range("label " + std::to_string(y) + " outside label space");

  LossGrads out;
  out.grads = zeros_like(p);

  Mlp::Cache t_cache, i_cache;
  const Matrix t_raw = p.time_encoder.forward(time_encoder_inputs(p, space), &t_cache);
  Vector t_norms, i_norms;
  const Matrix table = normalize_rows(t_raw, &t_norms);
  const Matrix i_raw = p.adaptor.forward(features, &i_cache);
  const Matrix img = normalize_rows(i_raw, &i_norms);

  const double inv_tau = std::exp(-p.log_tau);
  Matrix d_logits;
  Matrix logits;
  Matrix d_img, d_table;

  if (mode == LossMode::class_table) {
    logits = img * table.transpose() * inv_tau;
    out.loss = detail::softmax_xent(logits, labels, &d_logits);
    const Matrix d_sim = d_logits * inv_tau;
    d_img = d_sim * table;
    d_table = d_sim.transpose() * img;
  } else {
    Matrix targets(batch, table.cols());
    for (Eigen::Index i = 0; i < batch; ++i) targets.row(i) = table.row(labels[static_cast<std::size_t>(i)]);
    logits = img * targets.transpose() * inv_tau;
    std::vector<int> diag(static_cast<std::size_t>(batch));
    std::iota(diag.begin(), diag.end(), 0);
    out.loss = detail::softmax_xent(logits, diag, &d_logits);
    const Matrix d_sim = d_logits * inv_tau;
    d_img = d_sim * targets;
    const Matrix d_targets = d_sim.transpose() * img;
    d_table = Matrix::Zero(table.rows(), table.cols());
    for (Eigen::Index i = 0; i < batch; ++i)
      d_table.row(labels[static_cast<std::size_t>(i)]) += d_targets.row(i);
    out.degenerate = batch > 1 && std::all_of(labels.begin(), labels.end(),
                                              [&](int y) { return y == labels.front(); });
  }

  // logit = s * exp(-log_tau)  =>  d logit / d log_tau = -logit
  out.grads.log_tau = -(d_logits.cwiseProduct(logits)).sum();

  p.time_encoder.backward(t_cache, normalize_rows_backward(table, t_norms, d_table),
                          out.grads.time_encoder);
  p.adaptor.backward(i_cache, normalize_rows_backward(img, i_norms, d_img), out.grads.adaptor);
  if (!std::isfinite(out.loss)) throw std::runtime_error("loss_and_grads: non-finite loss");
  return out;
}

/// lr0 * 0.5^floor(epoch / halve_every).
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  return cfg.lr0 * std::pow(0.5, epoch / cfg.halve_every);
}

struct AdamState {
  ModelParams m;
  ModelParams v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam_state(const ModelParams& p) { return {zeros_like(p), zeros_like(p)}; }

/// Bias-corrected Adam; weight decay is added to the gradient before the moments.
inline void adam_step(ModelParams& params, ModelParams& grads, AdamState& state, double lr,
                      double weight_decay) {
  auto pv = trainable_tensors(params);
  auto gv = trainable_tensors(grads);
  auto mv = trainable_tensors(state.m);
  auto vv = trainable_tensors(state.v);
  if (pv.size() != gv.size() || pv.size() != mv.size() || pv.size() != vv.size())
    throw std::invalid_argument("adam_step: parameter structure mismatch");
  for (std::size_t t = 0; t < pv.size(); ++t) {
    if (pv[t].values.size() != gv[t].values.size() || pv[t].values.size() != mv[t].values.size())
      throw std::invalid_argument("adam_step: shape mismatch in " + pv[t].name);
    for (std::size_t i = 0; i < gv[t].values.size(); ++i)
      if (!std::isfinite(gv[t].values[i]))
        throw std::runtime_error("adam_step: non-finite gradient in " + gv[t].name + "[" +
                                 std::to_string(i) + "]");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < pv.size(); ++t) {
    auto p = pv[t].values;
    auto g = gv[t].values;
    auto m = mv[t].values;
    auto v = vv[t].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + weight_decay * p[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;  // summed contrastive loss divided by samples seen
  int steps = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> trace;
  int degenerate_batches = 0;
};

/// Full training run. Pure function of (dataset, model config, train config).
inline TrainResult train(const Dataset& ds, const ModelConfig& model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.empty()) throw ValidationError("train: empty dataset");
  if (ds.dim != model_cfg.feature_dim)
    throw ValidationError("train: dataset dim " + std::to_string(ds.dim) +
                          " != model feature dim " + std::to_string(model_cfg.feature_dim));
  ModelConfig mc = model_cfg;
  mc.loss_mode = cfg.loss_mode;
  TrainResult result;
  result.params = init_params(cfg.seed, mc);
  auto& params = result.params;
  AdamState adam = make_adam_state(params);

  const std::vector<int> labels = labels_of(ds, mc.space);
  const Matrix all = features_matrix(ds);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_at_epoch(cfg, epoch);
    EpochStats stats{epoch, lr, 0.0, 0};
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto n = static_cast<Eigen::Index>(end - start);
      Matrix x(n, all.cols());
      std::vector<int> y(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t row = order[start + static_cast<std::size_t>(i)];
        x.row(i) = all.row(static_cast<Eigen::Index>(row));
        y[static_cast<std::size_t>(i)] = labels[row];
      }
      LossGrads lg = loss_and_grads(params, x, y, cfg.loss_mode);
      if (lg.degenerate) ++result.degenerate_batches;
      total += lg.loss;
      // optimize the per-sample mean so lr does not depend on batch size
      const double scale = 1.0 / static_cast<double>(n);
      for (auto& t : trainable_tensors(lg.grads))
        for (double& g : t.values) g *= scale;
      adam_step(params, lg.grads, adam, lr, cfg.weight_decay);
      ++stats.steps;
    }
    stats.mean_loss = total / static_cast<double>(ds.size());
    result.trace.push_back(stats);
  }
  return result;
}

}  // namespace ticl

#pragma once

// Time Encoder, Image-Time Adaptor and the learnable temperature.
//
// Batches are Eigen matrices with one sample per row. Both encoders end in an
// L2 normalization, so every embedding that leaves this header is unit-norm.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ticl/alt_encoders.hpp"
#include "ticl/time_core.hpp"

namespace ticl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, gelu };
enum class TimeInput { one_hot, cyclic, rff, t2v };
enum class LossMode { class_table, batch };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw ValidationError("activation '" + s + "' (expected relu|gelu)");
}

inline std::string to_string(TimeInput t) {
  switch (t) {
    case TimeInput::one_hot: return "one-hot";
    case TimeInput::cyclic: return "cyclic";
    case TimeInput::rff: return "rff";
    case TimeInput::t2v: return "t2v";
  }
  return "one-hot";
}

inline TimeInput parse_time_input(const std::string& s) {
  if (s == "one-hot") return TimeInput::one_hot;
  if (s == "cyclic") return TimeInput::cyclic;
  if (s == "rff") return TimeInput::rff;
  if (s == "t2v") return TimeInput::t2v;
  throw ValidationError("time input '" + s + "' (expected one-hot|cyclic|rff|t2v)");
}

inline std::string to_string(LossMode m) { return m == LossMode::batch ? "batch" : "class"; }

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "class") return LossMode::class_table;
  if (s == "batch") return LossMode::batch;
  throw ValidationError("loss mode '" + s + "' (expected class|batch)");
}

namespace detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline double activate(Activation a, double x) {
  if (a == Activation::relu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

inline double activate_grad(Activation a, double x) {
  if (a == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

}  // namespace detail

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out

  int in_dim() const { return static_cast<int>(w.cols()); }
  int out_dim() const { return static_cast<int>(w.rows()); }
};

class Mlp {
public:
  std::vector<DenseLayer> layers;
  Activation activation = Activation::gelu;
  bool residual = false;

  struct Cache {
    Matrix input;
    std::vector<Matrix> layer_inputs;  // input fed to layer l
    std::vector<Matrix> pre;           // pre-activation of hidden layer l
  };

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  /// Activation after every layer except the last; `x` is rows = samples.
  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.cols() != in_dim())
      throw std::invalid_argument("mlp input width " + std::to_string(x.cols()) + " != " +
                                  std::to_string(in_dim()));
    if (cache) {
      cache->input = x;
      cache->layer_inputs.clear();
      cache->pre.clear();
    }
    Matrix h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (cache) cache->layer_inputs.push_back(h);
      Matrix z = h * layer.w.transpose();
      z.rowwise() += layer.b.transpose();
      if (l + 1 == layers.size()) {
        h = std::move(z);
      } else {
        if (cache) cache->pre.push_back(z);
        h = z.unaryExpr([a = activation](double v) { return detail::activate(a, v); });
      }
    }
    if (residual) h += x;
    return h;
  }

  /// Accumulates parameter gradients into `grad` (same shapes) and returns d/d input.
  Matrix backward(const Cache& cache, const Matrix& d_out, Mlp& grad) const {
    Matrix d = d_out;
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 != layers.size()) {
        const Matrix& z = cache.pre[l];
        d = d.cwiseProduct(
            z.unaryExpr([a = activation](double v) { return detail::activate_grad(a, v); }));
      }
      grad.layers[l].w.noalias() += d.transpose() * cache.layer_inputs[l];
      grad.layers[l].b += d.colwise().sum().transpose();
      d = d * layers[l].w;
    }
    if (residual) d += d_out;
    return d;
  }

  Mlp zeros_like() const {
    Mlp g = *this;
    for (auto& layer : g.layers) {
      layer.w.setZero();
      layer.b.setZero();
    }
    return g;
  }
};

struct ModelConfig {
  TimeLabelSpace space{24};
  int feature_dim = 768;
  int embed_dim = 768;
  std::vector<int> time_hidden{512};
  std::vector<int> adaptor_hidden{1024};
  Activation activation = Activation::gelu;
  bool adaptor_residual = true;  // effective only when feature_dim == embed_dim
  TimeInput time_input = TimeInput::one_hot;
  int rff_dim = 512;
  double rff_sigma = 1.0;
  int t2v_dim = 64;
  LossMode loss_mode = LossMode::class_table;  // recorded by the trainer

  int time_input_dim() const {
    switch (time_input) {
      case TimeInput::one_hot: return space.num_classes();
      case TimeInput::cyclic: return 2;
      case TimeInput::rff: return rff_dim;
      case TimeInput::t2v: return t2v_dim;
    }
    return space.num_classes();
  }
};

struct ModelParams {
  ModelConfig config;
  Mlp time_encoder;
  Mlp adaptor;
  double log_tau = 0.0;
  RffParams rff;
  Time2VecParams t2v;

  double tau() const { return std::exp(log_tau); }
};

inline constexpr double kInitialTemperature = 0.07;

namespace detail {

inline Mlp make_mlp(int in, const std::vector<int>& hidden, int out, Activation act,
                    bool residual, std::mt19937_64& rng) {
  Mlp mlp;
  mlp.activation = act;
  mlp.residual = residual && in == out;
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    // row-major fill order keeps the draw sequence independent of Eigen storage
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.w(r, c) = dist(rng);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

inline void check_dims(const ModelConfig& cfg) {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ValidationError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(cfg.feature_dim, "feature dim D");
  positive(cfg.embed_dim, "embedding dim K");
  for (int h : cfg.time_hidden) positive(h, "time encoder hidden dim");
  for (int h : cfg.adaptor_hidden) positive(h, "adaptor hidden dim");
  if (cfg.time_input == TimeInput::rff) positive(cfg.rff_dim, "rff dim");
  if (cfg.time_input == TimeInput::t2v && cfg.t2v_dim < 2)
    throw ValidationError("t2v dim must be >= 2");
  if (cfg.time_input != TimeInput::one_hot && cfg.space.is_product())
    throw ValidationError("product label spaces require one-hot time input");
}

}  // namespace detail

/// Glorot-uniform weights, zero biases, tau = 0.07. Deterministic in `seed`.
/// With `zero_adaptor_output` the adaptor's last layer starts at zero, so a
/// residual adaptor is the identity at init.
inline ModelParams init_params(std::uint64_t seed, const ModelConfig& cfg,
                               bool zero_adaptor_output = false) {
  detail::check_dims(cfg);
  ModelParams p;
  p.config = cfg;
  std::mt19937_64 rng(seed);
  p.time_encoder = detail::make_mlp(cfg.time_input_dim(), cfg.time_hidden, cfg.embed_dim,
                                    cfg.activation, false, rng);
  p.adaptor = detail::make_mlp(cfg.feature_dim, cfg.adaptor_hidden, cfg.embed_dim,
                               cfg.activation, cfg.adaptor_residual, rng);
  if (zero_adaptor_output) p.adaptor.layers.back().w.setZero();
  p.log_tau = std::log(kInitialTemperature);
  if (cfg.time_input == TimeInput::rff) p.rff = make_rff(rng(), cfg.rff_dim, cfg.rff_sigma);
  if (cfg.time_input == TimeInput::t2v) p.t2v = make_t2v(rng(), cfg.t2v_dim);
  return p;
}

/// Normalizes each row to unit L2 norm. Throws on an all-zero row.
inline Matrix normalize_rows(const Matrix& m, Vector* norms = nullptr) {
  Matrix out(m.rows(), m.cols());
  if (norms) norms->resize(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::domain_error("cannot normalize embedding row " + std::to_string(i) +
                              " with norm " + std::to_string(n));
    out.row(i) = m.row(i) / n;
    if (norms) (*norms)(i) = n;
  }
  return out;
}

/// Backward of row normalization u = v/|v|: dv = (du - u (u . du)) / |v|.
inline Matrix normalize_rows_backward(const Matrix& unit, const Vector& norms, const Matrix& d_unit) {
  Matrix d(unit.rows(), unit.cols());
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double proj = unit.row(i).dot(d_unit.row(i));
    d.row(i) = (d_unit.row(i) - proj * unit.row(i)) / norms(i);
  }
  return d;
}

/// Time-encoder input rows for every class of `space`. One-hot models need the
/// training label space; continuous encodings accept any granularity.
inline Matrix time_encoder_inputs(const ModelParams& p, const TimeLabelSpace& space) {
  const int c = space.num_classes();
  const auto& cfg = p.config;
  if (cfg.time_input == TimeInput::one_hot) {
    if (c != cfg.space.num_classes())
      throw ValidationError("one-hot time encoder was trained for " +
                            std::to_string(cfg.space.num_classes()) + " classes, asked for " +
                            std::to_string(c));
    return Matrix::Identity(c, c);
  }
  if (space.is_product()) throw ValidationError("product label spaces require one-hot time input");
  Matrix in(c, cfg.time_input_dim());
  for (int i = 0; i < c; ++i) {
    const ClockTime mid = class_midpoint(i, space);
    std::vector<double> row;
    if (cfg.time_input == TimeInput::cyclic) {
      const auto [cs, sn] = cyclic_encode(mid);
      row = {cs, sn};
    } else if (cfg.time_input == TimeInput::rff) {
      row = rff_encode(p.rff, mid);
    } else {
      row = t2v_encode(p.t2v, mid);
    }
    for (int j = 0; j < in.cols(); ++j) in(i, j) = row[static_cast<std::size_t>(j)];
  }
  return in;
}

/// C x K table of unit class embeddings.
inline Matrix class_embedding_table(const ModelParams& p, const TimeLabelSpace& space) {
  return normalize_rows(p.time_encoder.forward(time_encoder_inputs(p, space)));
}

inline Matrix class_embedding_table(const ModelParams& p) {
  return class_embedding_table(p, p.config.space);
}

/// Embedding of one raw time-encoder input (e.g. a one-hot vector).
inline Vector time_embed_input(const ModelParams& p, std::span<const double> input) {
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t j = 0; j < input.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = input[j];
  return normalize_rows(p.time_encoder.forward(x)).row(0).transpose();
}

inline Vector time_embed(const ModelParams& p, const TimeLabelSpace& space, int class_index) {
  if (class_index < 0 || class_index >= space.num_classes())
    throw std::out_of_range("class index " + std::to_string(class_index) + " outside label space");
  const Matrix in = time_encoder_inputs(p, space);
  return normalize_rows(p.time_encoder.forward(in.row(class_index))).row(0).transpose();
}

inline Vector time_embed(const ModelParams& p, int class_index) {
  return time_embed(p, p.config.space, class_index);
}

/// Adapted, unit-norm embeddings for a batch of features (rows).
inline Matrix image_embed_batch(const ModelParams& p, const Matrix& features) {
  if (features.cols() != p.config.feature_dim)
    throw ValidationError("feature dim " + std::to_string(features.cols()) +
                          " does not match model D=" + std::to_string(p.config.feature_dim));
  return normalize_rows(p.adaptor.forward(features));
}

inline Vector image_embed(const ModelParams& p, std::span<const double> features) {
  if (static_cast<int>(features.size()) != p.config.feature_dim)
    throw ValidationError("feature dim " + std::to_string(features.size()) +
                          " does not match model D=" + std::to_string(p.config.feature_dim));
  Matrix x(1, static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = features[j];
  return image_embed_batch(p, x).row(0).transpose();
}

/// logit_j = (image . row_j) / tau.
inline Vector similarity_logits(const Vector& image, const Matrix& table, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  return table * image / tau;
}

/// Stacks record features (selected rows, or all) into a matrix.
inline Matrix features_matrix(const Dataset& ds, std::span<const std::size_t> rows) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), ds.dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = ds.records[rows[i]].features;
    for (int j = 0; j < ds.dim; ++j) x(static_cast<Eigen::Index>(i), j) = f[static_cast<std::size_t>(j)];
  }
  return x;
}

inline Matrix features_matrix(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return features_matrix(ds, rows);
}

/// Named flat views of every trainable tensor, in a fixed order.
struct ParamTensor {
  std::string name;
  std::span<double> values;
};

inline std::vector<ParamTensor> trainable_tensors(ModelParams& p) {
  std::vector<ParamTensor> out;
  auto add_mlp = [&out](Mlp& mlp, const std::string& prefix) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      auto& layer = mlp.layers[l];
      out.push_back({prefix + "." + std::to_string(l) + ".w",
                     {layer.w.data(), static_cast<std::size_t>(layer.w.size())}});
      out.push_back({prefix + "." + std::to_string(l) + ".b",
                     {layer.b.data(), static_cast<std::size_t>(layer.b.size())}});
    }
  };
  add_mlp(p.time_encoder, "time_encoder");
  add_mlp(p.adaptor, "adaptor");
  out.push_back({"log_tau", {&p.log_tau, 1}});
  return out;
}

/// A zero-valued parameter set with the shapes of `p` (used for gradients and moments).
inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.time_encoder = p.time_encoder.zeros_like();
  z.adaptor = p.adaptor.zeros_like();
  z.log_tau = 0.0;
  return z;
}

}  // namespace ticl

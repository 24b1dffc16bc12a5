// spectemb/embednet.hpp

// Copyright 2026  The spectemb Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Bottleneck classifier over basis features.
//
// Four hidden layers, each
//   [linear projection] -> affine -> ReLU -> batch-norm [-> dropout]
// where the projection is present on layers 2 and 3 and dropout follows
// layers 1-3 during training. The batch-normalized output of layer 1 is
// added to that of layer 3. Layer 4 is the 25-unit bottleneck; its
// normalized output feeds a primary softmax head (severity or age) and an
// optional speaker-ID head. The training cost is
//
//   (1 - lambda) * CE(primary) + lambda * CE(speaker),
//
// averaged over the minibatch.
//
// Activations are stored one example per column.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "spectemb/binary_io.hpp"
#include "spectemb/common.hpp"
#include "spectemb/keyvalue.hpp"
#include "spectemb/subspace.hpp"

namespace spectemb {

constexpr Eigen::Index kBottleneckDim = 25;

struct NetworkConfig {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> hidden_dims{2000, 2000, 2000, kBottleneckDim};
  Eigen::Index bottleneck_proj_dim = 200;
  double dropout_rate = 0.2;
  Eigen::Index num_primary_classes = 2;
  bool use_speaker_task = false;
  Eigen::Index num_speakers = 0;
  double mtl_weight = 0.5;  // only used with the speaker task
  double learning_rate = 1e-3;
  double momentum = 0.9;
  Eigen::Index batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 1;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  double EffectiveMtlWeight() const { return use_speaker_task ? mtl_weight : 0.0; }

  void Validate() const {
    if (input_dim < 1) throw ConfigError("network input_dim must be >= 1");
    if (hidden_dims.size() != 4)
      throw ConfigError("hidden_dims must list exactly 4 layers");
    for (auto d : hidden_dims)
      if (d < 1) throw ConfigError("hidden_dims entries must be >= 1");
    if (hidden_dims[3] != kBottleneckDim)
      throw ConfigError("the last hidden layer must have 25 units");
    if (hidden_dims[0] != hidden_dims[2])
      throw ConfigError("skip connection needs hidden_dims[0] == hidden_dims[2]");
    if (bottleneck_proj_dim < 1) throw ConfigError("bottleneck_proj_dim must be >= 1");
    if (!(dropout_rate >= 0 && dropout_rate < 1))
      throw ConfigError("dropout_rate must be in [0, 1)");
    if (num_primary_classes < 1) throw ConfigError("need >= 1 primary class");
    if (use_speaker_task && num_speakers < 1)
      throw ConfigError("speaker task enabled with no speakers");
    if (!(mtl_weight >= 0 && mtl_weight <= 1))
      throw ConfigError("mtl_weight must be in [0, 1]");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(bn_epsilon >= 0)) throw ConfigError("bn_epsilon must be >= 0");
    if (!(bn_momentum >= 0 && bn_momentum < 1))
      throw ConfigError("bn_momentum must be in [0, 1)");
  }

  std::string ToKeyValue() const {
    std::string dims;
    for (std::size_t i = 0; i < hidden_dims.size(); ++i)
      dims += (i ? "," : "") + std::to_string(hidden_dims[i]);
    std::ostringstream o;
    o << "input_dim=" << input_dim << "\n"
      << "hidden_dims=" << dims << "\n"
      << "bottleneck_proj_dim=" << bottleneck_proj_dim << "\n"
      << "dropout_rate=" << FormatExact(dropout_rate) << "\n"
      << "num_primary_classes=" << num_primary_classes << "\n"
      << "use_speaker_task=" << (use_speaker_task ? "true" : "false") << "\n"
      << "num_speakers=" << num_speakers << "\n"
      << "mtl_weight=" << FormatExact(mtl_weight) << "\n"
      << "learning_rate=" << FormatExact(learning_rate) << "\n"
      << "momentum=" << FormatExact(momentum) << "\n"
      << "batch_size=" << batch_size << "\n"
      << "epochs=" << epochs << "\n"
      << "seed=" << seed << "\n"
      << "bn_epsilon=" << FormatExact(bn_epsilon) << "\n"
      << "bn_momentum=" << FormatExact(bn_momentum) << "\n";
    return o.str();
  }

  /// Reads the training hyperparameters (not the data-derived sizes).
  void ReadHyperparameters(const KeyValueConfig &kv) {
    if (kv.Has("hidden_dims")) {
      hidden_dims.clear();
      std::stringstream ss(kv.GetString("hidden_dims", ""));
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          hidden_dims.push_back(std::stoll(Trim(tok)));
        } catch (const std::exception &) {
          throw ConfigError("hidden_dims: bad entry '" + tok + "'");
        }
      }
    }
    bottleneck_proj_dim = kv.GetInt("bottleneck_proj_dim", bottleneck_proj_dim);
    dropout_rate = kv.GetDouble("dropout_rate", dropout_rate);
    use_speaker_task = kv.GetBool("use_speaker_task", use_speaker_task);
    mtl_weight = kv.GetDouble("mtl_weight", mtl_weight);
    learning_rate = kv.GetDouble("learning_rate", learning_rate);
    momentum = kv.GetDouble("momentum", momentum);
    batch_size = kv.GetInt("batch_size", batch_size);
    epochs = int(kv.GetInt("epochs", epochs));
    bn_epsilon = kv.GetDouble("bn_epsilon", bn_epsilon);
    bn_momentum = kv.GetDouble("bn_momentum", bn_momentum);
  }

  /// Inverse of ToKeyValue().
  static NetworkConfig FromKeyValue(const KeyValueConfig &kv) {
    NetworkConfig c;
    c.ReadHyperparameters(kv);
    c.input_dim = kv.GetInt("input_dim", c.input_dim);
    c.num_primary_classes = kv.GetInt("num_primary_classes", c.num_primary_classes);
    c.num_speakers = kv.GetInt("num_speakers", c.num_speakers);
    c.seed = std::uint64_t(kv.GetInt("seed", (long long)c.seed));
    return c;
  }
};

struct HiddenLayer {
  Matrix projection;  // empty on layers without a linear bottleneck
  Matrix weight;
  Vector bias;
  Vector bn_scale;
  Vector bn_shift;
  Vector running_mean;
  Vector running_var;
};

struct AffineHead {
  Matrix weight;
  Vector bias;
};

struct EmbeddingNetwork {
  NetworkConfig config;
  std::array<HiddenLayer, 4> hidden;
  AffineHead primary;
  AffineHead speaker;  // empty without the speaker task

  bool HasSpeakerHead() const { return speaker.weight.size() > 0; }
};

/// Calls f(name, param_of_net0, param_of_net1, ...) for every trainable
/// parameter, in a fixed order. All nets must share one architecture.
template <class F, class First, class... Rest>
void VisitParameters(F &&f, First &first, Rest &...rest) {
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string p = "hidden" + std::to_string(l + 1) + ".";
    if (first.hidden[l].projection.size() > 0)
      f(p + "projection", first.hidden[l].projection, rest.hidden[l].projection...);
    f(p + "weight", first.hidden[l].weight, rest.hidden[l].weight...);
    f(p + "bias", first.hidden[l].bias, rest.hidden[l].bias...);
    f(p + "bn_scale", first.hidden[l].bn_scale, rest.hidden[l].bn_scale...);
    f(p + "bn_shift", first.hidden[l].bn_shift, rest.hidden[l].bn_shift...);
  }
  f("primary.weight", first.primary.weight, rest.primary.weight...);
  f("primary.bias", first.primary.bias, rest.primary.bias...);
  if (first.HasSpeakerHead()) {
    f("speaker.weight", first.speaker.weight, rest.speaker.weight...);
    f("speaker.bias", first.speaker.bias, rest.speaker.bias...);
  }
}

namespace embednet_detail {

inline void FillUniform(Matrix &m, double limit, Rng &rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.Uniform(-limit, limit);
}

}  // namespace embednet_detail

/// Fresh network: ReLU layers get uniform fan-in init with limit
/// sqrt(6 / fan_in), projections sqrt(3 / fan_in); output heads start at 0
/// so that untrained heads predict the uniform distribution.
inline EmbeddingNetwork InitializeNetwork(const NetworkConfig &cfg) {
  cfg.Validate();
  Rng rng(cfg.seed);
  EmbeddingNetwork net;
  net.config = cfg;
  Eigen::Index in = cfg.input_dim;
  for (std::size_t l = 0; l < 4; ++l) {
    HiddenLayer &h = net.hidden[l];
    const Eigen::Index out = cfg.hidden_dims[l];
    if (l == 1 || l == 2) {
      h.projection.resize(cfg.bottleneck_proj_dim, in);
      embednet_detail::FillUniform(h.projection, std::sqrt(3.0 / double(in)), rng);
      in = cfg.bottleneck_proj_dim;
    }
    h.weight.resize(out, in);
    embednet_detail::FillUniform(h.weight, std::sqrt(6.0 / double(in)), rng);
    h.bias = Vector::Zero(out);
    h.bn_scale = Vector::Ones(out);
    h.bn_shift = Vector::Zero(out);
    h.running_mean = Vector::Zero(out);
    h.running_var = Vector::Ones(out);
    in = out;
  }
  net.primary.weight = Matrix::Zero(cfg.num_primary_classes, kBottleneckDim);
  net.primary.bias = Vector::Zero(cfg.num_primary_classes);
  if (cfg.use_speaker_task) {
    net.speaker.weight = Matrix::Zero(cfg.num_speakers, kBottleneckDim);
    net.speaker.bias = Vector::Zero(cfg.num_speakers);
  }
  return net;
}

/// Same architecture, every parameter zero. Used for gradient accumulators.
inline EmbeddingNetwork ZerosLike(const EmbeddingNetwork &net) {
  EmbeddingNetwork z = net;
  VisitParameters([](const std::string &, auto &p) { p.setZero(); }, z);
  return z;
}

enum class Mode { kTrain, kInfer };

struct LayerCache {
  Matrix input;      // layer input
  Matrix projected;  // after the optional projection
  Matrix pre;        // affine output
  Matrix xhat;       // normalized ReLU output
  Vector inv_std;
  Matrix mask;       // scaled dropout mask, empty when no dropout
};

struct ForwardResult {
  Matrix primary_logits;
  Matrix speaker_logits;  // empty without a speaker head
  Matrix bottleneck;      // 25 x batch
};

struct ForwardCache {
  Mode mode = Mode::kInfer;
  std::array<LayerCache, 4> layers;
  std::array<Vector, 4> batch_mean;
  std::array<Vector, 4> batch_var;
  ForwardResult result;
};

/// Runs the network on a batch (one example per column). In train mode
/// batch-norm uses batch statistics, and dropout is applied when
/// `dropout_rng` is given and the configured rate is positive. Infer mode
/// uses running statistics and never drops units. The network itself is
/// not modified; running statistics are updated by the trainer.
inline ForwardResult Forward(const EmbeddingNetwork &net, const Matrix &batch,
                             Mode mode, Rng *dropout_rng = nullptr,
                             ForwardCache *cache = nullptr) {
  const NetworkConfig &cfg = net.config;
  if (batch.rows() != cfg.input_dim)
    throw ArgumentError("forward: feature dim " + std::to_string(batch.rows()) +
                        " does not match network input dim " +
                        std::to_string(cfg.input_dim));
  if (batch.cols() < 1) throw ArgumentError("forward: empty batch");
  const Eigen::Index n = batch.cols();
  const bool dropout = mode == Mode::kTrain && dropout_rng != nullptr &&
                       cfg.dropout_rate > 0;
  const double keep = 1.0 - cfg.dropout_rate;

  Matrix h = batch;
  Matrix h1;
  for (std::size_t l = 0; l < 4; ++l) {
    const HiddenLayer &layer = net.hidden[l];
    Matrix projected = layer.projection.size() > 0 ? Matrix(layer.projection * h) : h;
    Matrix pre = layer.weight * projected;
    pre.colwise() += layer.bias;
    Matrix act = pre.cwiseMax(0.0);

    Vector mean, var;
    if (mode == Mode::kTrain) {
      mean = act.rowwise().mean();
      var = (act.colwise() - mean).array().square().rowwise().mean();
    } else {
      mean = layer.running_mean;
      var = layer.running_var;
    }
    Vector inv_std = (var.array() + cfg.bn_epsilon).rsqrt();
    Matrix xhat = (act.colwise() - mean).array().colwise() * inv_std.array();
    Matrix y = (xhat.array().colwise() * layer.bn_scale.array()).colwise() +
               layer.bn_shift.array();
    if (l == 2) y += h1;

    Matrix mask;
    if (dropout && l < 3) {
      mask.resize(y.rows(), n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i)
          mask(i, j) = dropout_rng->Uniform() < keep ? 1.0 / keep : 0.0;
      y = y.cwiseProduct(mask);
    }

    if (cache != nullptr) {
      LayerCache &c = cache->layers[l];
      c.input = std::move(h);
      c.projected = std::move(projected);
      c.pre = std::move(pre);
      c.xhat = std::move(xhat);
      c.inv_std = std::move(inv_std);
      c.mask = std::move(mask);
      cache->batch_mean[l] = std::move(mean);
      cache->batch_var[l] = std::move(var);
    }
    if (l == 0) h1 = y;
    h = std::move(y);
  }

  ForwardResult r;
  r.bottleneck = std::move(h);
  r.primary_logits = net.primary.weight * r.bottleneck;
  r.primary_logits.colwise() += net.primary.bias;
  if (net.HasSpeakerHead()) {
    r.speaker_logits = net.speaker.weight * r.bottleneck;
    r.speaker_logits.colwise() += net.speaker.bias;
  }
  if (cache != nullptr) {
    cache->mode = mode;
    cache->result = r;
  }
  return r;
}

/// Column-wise softmax with max subtraction.
inline Matrix Softmax(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - mx).exp();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

/// Mean cross-entropy of integer labels under column-wise softmax.
inline double CrossEntropy(const Matrix &logits, const std::vector<int> &labels) {
  if (Eigen::Index(labels.size()) != logits.cols())
    throw ArgumentError("cross-entropy: label count does not match batch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int y = labels[std::size_t(j)];
    if (y < 0 || y >= logits.rows()) throw ArgumentError("label out of range");
    total += LogSumExp(logits.col(j)) - logits(y, j);
  }
  return total / double(logits.cols());
}

/// (1 - lambda) * CE_primary + lambda * CE_speaker. With lambda == 0 the
/// speaker terms are ignored and may be absent.
inline double MtlLoss(const Matrix &primary_logits, const Matrix *speaker_logits,
                      const std::vector<int> &primary_labels,
                      const std::vector<int> *speaker_labels, double lambda) {
  if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("mtl weight must be in [0, 1]");
  const double ce_p = CrossEntropy(primary_logits, primary_labels);
  if (lambda == 0.0) return ce_p;
  if (speaker_logits == nullptr || speaker_logits->size() == 0 ||
      speaker_labels == nullptr)
    throw ConfigError("mtl weight > 0 requires a speaker head and speaker labels");
  return (1.0 - lambda) * ce_p + lambda * CrossEntropy(*speaker_logits, *speaker_labels);
}

struct Labels {
  std::vector<int> primary;
  std::vector<int> speaker;  // may be empty when lambda == 0
};

namespace embednet_detail {

// d(weight * CE)/d(logits) for mean reduction.
inline Matrix SoftmaxGradient(const Matrix &logits, const std::vector<int> &labels,
                              double weight) {
  Matrix g = Softmax(logits);
  for (Eigen::Index j = 0; j < g.cols(); ++j) g(labels[std::size_t(j)], j) -= 1.0;
  return g * (weight / double(g.cols()));
}

}  // namespace embednet_detail

/// Gradient of MtlLoss with respect to every trainable parameter, using the
/// activations recorded by Forward(..., cache). Returned in a network of the
/// same shape.
inline EmbeddingNetwork Backward(const EmbeddingNetwork &net, const ForwardCache &cache,
                                 const Labels &labels, double lambda) {
  using embednet_detail::SoftmaxGradient;
  const ForwardResult &r = cache.result;
  const Eigen::Index n = r.bottleneck.cols();
  if (Eigen::Index(labels.primary.size()) != n)
    throw ArgumentError("backward: label count does not match batch");
  EmbeddingNetwork g = ZerosLike(net);

  Matrix dp = SoftmaxGradient(r.primary_logits, labels.primary, 1.0 - lambda);
  g.primary.weight = dp * r.bottleneck.transpose();
  g.primary.bias = dp.rowwise().sum();
  Matrix dh = net.primary.weight.transpose() * dp;
  if (net.HasSpeakerHead()) {
    if (lambda > 0 && Eigen::Index(labels.speaker.size()) != n)
      throw ArgumentError("backward: speaker labels required when lambda > 0");
    if (lambda > 0) {
      Matrix ds = SoftmaxGradient(r.speaker_logits, labels.speaker, lambda);
      g.speaker.weight = ds * r.bottleneck.transpose();
      g.speaker.bias = ds.rowwise().sum();
      dh += net.speaker.weight.transpose() * ds;
    }
  } else if (lambda > 0) {
    throw ConfigError("mtl weight > 0 requires a speaker head");
  }

  Matrix dskip;
  for (std::size_t l = 4; l-- > 0;) {
    const HiddenLayer &layer = net.hidden[l];
    const LayerCache &c = cache.layers[l];
    HiddenLayer &gl = g.hidden[l];
    Matrix dy = c.mask.size() > 0 ? Matrix(dh.cwiseProduct(c.mask)) : dh;
    if (l == 2) dskip = dy;

    gl.bn_scale = dy.cwiseProduct(c.xhat).rowwise().sum();
    gl.bn_shift = dy.rowwise().sum();
    Matrix dxhat = dy.array().colwise() * layer.bn_scale.array();
    Matrix dact;
    if (cache.mode == Mode::kTrain) {
      Vector mean_d = dxhat.rowwise().mean();
      Vector mean_dx = dxhat.cwiseProduct(c.xhat).rowwise().mean();
      dact = ((dxhat.colwise() - mean_d) -
              Matrix(c.xhat.array().colwise() * mean_dx.array()))
                 .array()
                 .colwise() *
             c.inv_std.array();
    } else {
      dact = dxhat.array().colwise() * c.inv_std.array();
    }
    Matrix dpre = dact.cwiseProduct(
        (c.pre.array() > 0.0).cast<double>().matrix());
    gl.weight = dpre * c.projected.transpose();
    gl.bias = dpre.rowwise().sum();
    Matrix dproj = layer.weight.transpose() * dpre;
    Matrix din;
    if (layer.projection.size() > 0) {
      gl.projection = dproj * c.input.transpose();
      din = layer.projection.transpose() * dproj;
    } else {
      din = std::move(dproj);
    }
    if (l == 1) din += dskip;
    dh = std::move(din);
  }
  return g;
}

struct TrainingRecord {
  BasisFeature feature;
  int primary_label = 0;
  int speaker_label = -1;  // -1 when unknown
};

struct EpochStats {
  int epoch = 0;  // 0 is the untrained network
  double loss = 0;
  double primary_accuracy = 0;
  double speaker_accuracy = 0;  // NaN without a speaker head
};

struct TrainingLog {
  std::vector<EpochStats> epochs;

  /// One line per epoch: epoch, loss, primary-acc, speaker-acc.
  std::string ToText() const {
    std::string out = "# epoch\tloss\tprimary_acc\tspeaker_acc\n";
    char buf[160];
    for (const auto &e : epochs) {
      std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.6f\t%s\n", e.epoch, e.loss,
                    e.primary_accuracy,
                    std::isnan(e.speaker_accuracy)
                        ? "-"
                        : std::to_string(e.speaker_accuracy).c_str());
      out += buf;
    }
    return out;
  }
};

/// Argmax with ties resolved to the lowest index.
inline Eigen::Index ArgMax(const Eigen::Ref<const Vector> &v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

struct Evaluation {
  double loss = 0;
  double primary_accuracy = 0;
  double speaker_accuracy = std::numeric_limits<double>::quiet_NaN();
};

/// Infer-mode loss and accuracies over a whole data set.
inline Evaluation Evaluate(const EmbeddingNetwork &net, const Matrix &data,
                           const Labels &labels, Eigen::Index chunk = 256) {
  const double lambda = net.config.EffectiveMtlWeight();
  const Eigen::Index n = data.cols();
  Evaluation ev;
  double loss = 0, hit_p = 0, hit_s = 0;
  const bool speaker = net.HasSpeakerHead() &&
                       Eigen::Index(labels.speaker.size()) == n;
  for (Eigen::Index b = 0; b < n; b += chunk) {
    const Eigen::Index m = std::min(chunk, n - b);
    ForwardResult r = Forward(net, data.middleCols(b, m), Mode::kInfer);
    std::vector<int> lp(labels.primary.begin() + b, labels.primary.begin() + b + m);
    std::vector<int> ls;
    if (speaker) ls.assign(labels.speaker.begin() + b, labels.speaker.begin() + b + m);
    loss += double(m) * MtlLoss(r.primary_logits, speaker ? &r.speaker_logits : nullptr,
                                lp, speaker ? &ls : nullptr, speaker ? lambda : 0.0);
    for (Eigen::Index j = 0; j < m; ++j) {
      hit_p += ArgMax(r.primary_logits.col(j)) == lp[std::size_t(j)];
      if (speaker) hit_s += ArgMax(r.speaker_logits.col(j)) == ls[std::size_t(j)];
    }
  }
  ev.loss = loss / double(n);
  ev.primary_accuracy = hit_p / double(n);
  if (speaker) ev.speaker_accuracy = hit_s / double(n);
  return ev;
}

struct TrainResult {
  EmbeddingNetwork net;
  TrainingLog log;
};

/// Minibatch SGD with momentum. Each epoch visits the records in a fresh
/// seeded permutation; the log holds an infer-mode evaluation of the
/// network before training (epoch 0) and after every epoch.
inline TrainResult Train(const std::vector<TrainingRecord> &records, NetworkConfig cfg) {
  if (records.empty()) throw DataError("no training records");
  cfg.input_dim = records.front().feature.values.size();
  cfg.Validate();
  const Eigen::Index n = Eigen::Index(records.size());
  const double lambda = cfg.EffectiveMtlWeight();

  Matrix data(cfg.input_dim, n);
  Labels labels;
  std::vector<int> per_class(std::size_t(cfg.num_primary_classes), 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const TrainingRecord &r = records[std::size_t(j)];
    if (r.feature.values.size() != cfg.input_dim)
      throw ArgumentError("record '" + r.feature.utterance_id + "' has feature dim " +
                          std::to_string(r.feature.values.size()) + ", expected " +
                          std::to_string(cfg.input_dim));
    if (r.primary_label < 0 || r.primary_label >= cfg.num_primary_classes)
      throw ArgumentError("primary label out of range for '" + r.feature.utterance_id + "'");
    if (cfg.use_speaker_task &&
        (r.speaker_label < 0 || r.speaker_label >= cfg.num_speakers))
      throw ArgumentError("speaker label out of range for '" + r.feature.utterance_id + "'");
    data.col(j) = r.feature.values;
    labels.primary.push_back(r.primary_label);
    if (cfg.use_speaker_task) labels.speaker.push_back(r.speaker_label);
    ++per_class[std::size_t(r.primary_label)];
  }
  for (std::size_t k = 0; k < per_class.size(); ++k)
    if (per_class[k] == 0)
      throw DataError("primary class " + std::to_string(k) + " has no training records");
  if (!data.allFinite()) throw NumericError("training features contain non-finite values");

  TrainResult out;
  out.net = InitializeNetwork(cfg);
  EmbeddingNetwork &net = out.net;
  EmbeddingNetwork velocity = ZerosLike(net);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  auto record = [&](int epoch) {
    Evaluation ev = Evaluate(net, data, labels);
    if (!std::isfinite(ev.loss))
      throw NumericError("training diverged: non-finite loss after epoch " +
                         std::to_string(epoch));
    out.log.epochs.push_back({epoch, ev.loss, ev.primary_accuracy, ev.speaker_accuracy});
  };
  record(0);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  const double keep_stats = cfg.bn_momentum;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    for (Eigen::Index b = 0; b < n; b += cfg.batch_size) {
      const Eigen::Index m = std::min(cfg.batch_size, n - b);
      Matrix batch(cfg.input_dim, m);
      Labels bl;
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index src = order[std::size_t(b + j)];
        batch.col(j) = data.col(src);
        bl.primary.push_back(labels.primary[std::size_t(src)]);
        if (cfg.use_speaker_task) bl.speaker.push_back(labels.speaker[std::size_t(src)]);
      }
      ForwardCache cache;
      Forward(net, batch, Mode::kTrain, &rng, &cache);
      const double loss = MtlLoss(cache.result.primary_logits,
                                  net.HasSpeakerHead() ? &cache.result.speaker_logits : nullptr,
                                  bl.primary, cfg.use_speaker_task ? &bl.speaker : nullptr,
                                  lambda);
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite minibatch loss in epoch " +
                           std::to_string(epoch));
      EmbeddingNetwork grad = Backward(net, cache, bl, lambda);
      VisitParameters(
          [&](const std::string &, auto &p, auto &v, auto &g) {
            v = cfg.momentum * v - cfg.learning_rate * g;
            p += v;
          },
          net, velocity, grad);
      for (std::size_t l = 0; l < 4; ++l) {
        HiddenLayer &h = net.hidden[l];
        h.running_mean = keep_stats * h.running_mean + (1 - keep_stats) * cache.batch_mean[l];
        h.running_var = keep_stats * h.running_var + (1 - keep_stats) * cache.batch_var[l];
      }
    }
    record(epoch);
  }
  return out;
}

/// 25-dim bottleneck activations of one feature (infer mode).
inline Vector ExtractEmbedding(const EmbeddingNetwork &net, const BasisFeature &feature) {
  if (feature.values.size() != net.config.input_dim)
    throw ArgumentError("extract: feature '" + feature.utterance_id + "' has dim " +
                        std::to_string(feature.values.size()) + ", network expects " +
                        std::to_string(net.config.input_dim));
  return Forward(net, feature.values, Mode::kInfer).bottleneck.col(0);
}

struct Classification {
  Eigen::Index label = 0;
  Vector posterior;
};

inline Classification Classify(const EmbeddingNetwork &net, const BasisFeature &feature) {
  if (feature.values.size() != net.config.input_dim)
    throw ArgumentError("classify: feature dim mismatch");
  ForwardResult r = Forward(net, feature.values, Mode::kInfer);
  Classification c;
  c.posterior = Softmax(r.primary_logits).col(0);
  c.label = ArgMax(c.posterior);
  return c;
}

// Model container ------------------------------------------------------------

inline constexpr char kNetworkMagic[9] = "SPTEMBNN";

inline std::string SerializeNetwork(const EmbeddingNetwork &net) {
  BinaryWriter w(kNetworkMagic, 1);
  w.PutString(net.config.ToKeyValue());
  VisitParameters([&](const std::string &name, const auto &p) { w.PutMatrix(name, p); },
                  net);
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string p = "hidden" + std::to_string(l + 1) + ".";
    w.PutMatrix(p + "running_mean", net.hidden[l].running_mean);
    w.PutMatrix(p + "running_var", net.hidden[l].running_var);
  }
  return w.Bytes();
}

inline EmbeddingNetwork DeserializeNetwork(const std::string &bytes,
                                           const std::string &origin = "<model>") {
  BinaryReader r(bytes, kNetworkMagic, origin);
  if (r.Version() != 1)
    throw FormatError(origin + ": unsupported model version " + std::to_string(r.Version()));
  KeyValueConfig kv = KeyValueConfig::Parse(r.GetString(), origin);
  NetworkConfig cfg = NetworkConfig::FromKeyValue(kv);
  kv.CheckAllUsed();
  EmbeddingNetwork net = InitializeNetwork(cfg);
  VisitParameters(
      [&](const std::string &name, auto &p) {
        Matrix m = r.GetMatrix(name, p.rows(), p.cols());
        p = m;
      },
      net);
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string p = "hidden" + std::to_string(l + 1) + ".";
    HiddenLayer &h = net.hidden[l];
    h.running_mean = r.GetMatrix(p + "running_mean", h.running_mean.size(), 1).col(0);
    h.running_var = r.GetMatrix(p + "running_var", h.running_var.size(), 1).col(0);
    if ((h.running_var.array() < 0).any())
      throw FormatError(origin + ": negative running variance");
  }
  r.ExpectEnd();
  bool finite = true;
  VisitParameters([&](const std::string &, const auto &p) { finite &= p.allFinite(); }, net);
  if (!finite) throw FormatError(origin + ": non-finite parameters");
  return net;
}

inline void SaveNetwork(const EmbeddingNetwork &net, const std::string &path) {
  const std::string bytes = SerializeNetwork(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline EmbeddingNetwork LoadNetwork(const std::string &path) {
  return DeserializeNetwork(BinaryReader::Slurp(path), path);
}

}  // namespace spectemb

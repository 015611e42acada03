#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "blapose/augmentation.hpp"
#include "blapose/error.hpp"
#include "blapose/random.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

struct ModelDims {
  int joints = 17;
  int c = 256;         // projected input width
  int c_prime = 512;   // GRU hidden width
  bool bidirectional = true;

  int input_dim() const noexcept { return 2 * joints; }
  int output_dim() const noexcept { return joints - 1; }
  int head_dim() const noexcept { return bidirectional ? 2 * c_prime : c_prime; }
  int directions() const noexcept { return bidirectional ? 2 : 1; }

  void validate() const {
    if (joints < 2 || c < 1 || c_prime < 1) throw ValidationError("model dimensions must be positive");
  }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Gate tensors of one GRU direction, in declaration order.
template <typename M>
struct GruTensors {
  M Wz, Wr, Wh;  // c' x c
  M Uz, Ur, Uh;  // c' x c'
  M bz, br, bh;  // c' x 1
};

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using MutMap = Eigen::Map<Eigen::MatrixXd>;
using GruView = GruTensors<ConstMap>;
using GruGradView = GruTensors<MutMap>;

// Every parameter tensor lives in one flat vector so the optimizer, the
// gradient check and serialization all walk the same storage. Tensor order:
// W_p, b_p, then per direction W_z W_r W_h U_z U_r U_h b_z b_r b_h, then W_R.
class LengthModelParams {
 public:
  struct Slot {
    std::string name;
    Eigen::Index rows = 0, cols = 0, offset = 0;
    Eigen::Index size() const noexcept { return rows * cols; }
  };

  LengthModelParams() = default;
  explicit LengthModelParams(const ModelDims& dims) : dims_(dims) {
    dims_.validate();
    Eigen::Index offset = 0;
    auto add = [&](std::string name, Eigen::Index r, Eigen::Index c) {
      slots_.push_back({std::move(name), r, c, offset});
      offset += r * c;
    };
    add("W_p", dims.c, dims.input_dim());
    add("b_p", dims.c, 1);
    for (int d = 0; d < dims.directions(); ++d) {
      const std::string pre = d == 0 ? "fwd." : "bwd.";
      for (const char* g : {"W_z", "W_r", "W_h"}) add(pre + g, dims.c_prime, dims.c);
      for (const char* g : {"U_z", "U_r", "U_h"}) add(pre + g, dims.c_prime, dims.c_prime);
      for (const char* g : {"b_z", "b_r", "b_h"}) add(pre + g, dims.c_prime, 1);
    }
    add("W_R", dims.output_dim(), dims.head_dim());
    data_ = Eigen::VectorXd::Zero(offset);
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per tensor. Biases use the
  // fan-in of their layer (2J for b_p, c' for the gates).
  static LengthModelParams initialized(const ModelDims& dims, std::uint64_t seed) {
    LengthModelParams p(dims);
    Rng rng(seed);
    for (const auto& s : p.slots_) {
      Eigen::Index fan_in = s.cols;
      if (s.cols == 1) fan_in = s.name == "b_p" ? dims.input_dim() : dims.c_prime;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < s.size(); ++i) p.data_(s.offset + i) = rng.uniform(-bound, bound);
    }
    return p;
  }

  const ModelDims& dims() const noexcept { return dims_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  Eigen::VectorXd& flat() noexcept { return data_; }
  const Eigen::VectorXd& flat() const noexcept { return data_; }
  Eigen::Index size() const noexcept { return data_.size(); }

  MutMap tensor(std::size_t slot) {
    const auto& s = slots_.at(slot);
    return MutMap(data_.data() + s.offset, s.rows, s.cols);
  }
  ConstMap tensor(std::size_t slot) const {
    const auto& s = slots_.at(slot);
    return ConstMap(data_.data() + s.offset, s.rows, s.cols);
  }
  std::size_t slot_index(std::string_view name) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].name == name) return i;
    throw ValidationError("no parameter tensor named " + std::string(name));
  }
  MutMap tensor(std::string_view name) { return tensor(slot_index(name)); }
  ConstMap tensor(std::string_view name) const { return tensor(slot_index(name)); }

  ConstMap W_p() const { return tensor(std::size_t{0}); }
  ConstMap b_p() const { return tensor(std::size_t{1}); }
  ConstMap W_R() const { return tensor(slots_.size() - 1); }

  GruView gru(int direction) const {
    const std::size_t b = 2 + 9 * static_cast<std::size_t>(direction);
    return {tensor(b + 0), tensor(b + 1), tensor(b + 2), tensor(b + 3), tensor(b + 4),
            tensor(b + 5), tensor(b + 6), tensor(b + 7), tensor(b + 8)};
  }
  GruGradView gru_mut(int direction) {
    const std::size_t b = 2 + 9 * static_cast<std::size_t>(direction);
    return {tensor(b + 0), tensor(b + 1), tensor(b + 2), tensor(b + 3), tensor(b + 4),
            tensor(b + 5), tensor(b + 6), tensor(b + 7), tensor(b + 8)};
  }

  LengthModelParams zeros_like() const {
    LengthModelParams z = *this;
    z.data_.setZero();
    return z;
  }

 private:
  ModelDims dims_;
  std::vector<Slot> slots_;
  Eigen::VectorXd data_;
};

// ---------------------------------------------------------------------------
// Forward pieces. Every function works on column batches: B samples are B
// columns, a single sample is a one-column matrix.

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

inline Eigen::MatrixXd project_input(const Eigen::MatrixXd& x, const LengthModelParams& params) {
  if (x.rows() != params.dims().input_dim())
    throw DimensionMismatch("input width", params.dims().input_dim(), x.rows());
  Eigen::MatrixXd out = params.W_p() * x;
  out.colwise() += params.b_p().col(0);
  return out;
}

inline Eigen::VectorXd project_input(const Eigen::VectorXd& x, const LengthModelParams& params) {
  const Eigen::MatrixXd col = x;
  return project_input(col, params).col(0);
}

struct GruCache {
  Eigen::MatrixXd h_prev, z, r, cand;
};

// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
// cand = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*cand.
inline Eigen::MatrixXd gru_step(const GruView& g, const Eigen::MatrixXd& xp,
                                const Eigen::MatrixXd& h, GruCache* cache = nullptr) {
  Eigen::MatrixXd az = g.Wz * xp + g.Uz * h;
  az.colwise() += g.bz.col(0);
  Eigen::MatrixXd ar = g.Wr * xp + g.Ur * h;
  ar.colwise() += g.br.col(0);
  const Eigen::MatrixXd z = sigmoid(az);
  const Eigen::MatrixXd r = sigmoid(ar);
  const Eigen::MatrixXd rh = r.cwiseProduct(h);
  Eigen::MatrixXd ah = g.Wh * xp + g.Uh * rh;
  ah.colwise() += g.bh.col(0);
  const Eigen::MatrixXd cand = ah.array().tanh().matrix();
  Eigen::MatrixXd next =
      ((1.0 - z.array()) * h.array() + z.array() * cand.array()).matrix();
  if (cache) *cache = {h, z, r, cand};
  return next;
}

inline Eigen::VectorXd gru_cell(const Eigen::VectorXd& xp, const Eigen::VectorXd& h_prev,
                                const LengthModelParams& params, int direction = 0) {
  if (xp.size() != params.dims().c) throw DimensionMismatch("GRU input", params.dims().c, xp.size());
  if (h_prev.size() != params.dims().c_prime)
    throw DimensionMismatch("GRU hidden", params.dims().c_prime, h_prev.size());
  const Eigen::MatrixXd x = xp, h = h_prev;
  return gru_step(params.gru(direction), x, h).col(0);
}

// Per-timestep inputs for a batch: steps[t] is 2J x B.
using StepInputs = std::vector<Eigen::MatrixXd>;

inline StepInputs to_steps(const Eigen::MatrixXd& frames) {
  StepInputs steps(static_cast<std::size_t>(frames.rows()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t) steps[t] = frames.row(t).transpose();
  return steps;
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> projected;              // c x B per step
  std::vector<std::vector<GruCache>> caches;           // per direction, in processing order
  Eigen::MatrixXd head_input;                          // h_dim x B
  Eigen::MatrixXd output;                              // (J-1) x B
};

inline ForwardTrace forward_trace(const StepInputs& steps, const LengthModelParams& params,
                                  bool keep_caches) {
  const auto& dims = params.dims();
  if (steps.empty()) throw ValidationError("sequence must contain at least one frame");
  const Eigen::Index batch = steps.front().cols();
  const long n = static_cast<long>(steps.size());
  ForwardTrace tr;
  tr.projected.reserve(steps.size());
  for (const auto& x : steps) tr.projected.push_back(project_input(x, params));
  tr.caches.resize(static_cast<std::size_t>(dims.directions()));
  tr.head_input.resize(dims.head_dim(), batch);
  for (int d = 0; d < dims.directions(); ++d) {
    const GruView g = params.gru(d);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dims.c_prime, batch);
    if (keep_caches) tr.caches[d].resize(steps.size());
    for (long k = 0; k < n; ++k) {
      const long t = d == 0 ? k : n - 1 - k;
      h = gru_step(g, tr.projected[t], h, keep_caches ? &tr.caches[d][k] : nullptr);
    }
    tr.head_input.middleRows(static_cast<Eigen::Index>(d) * dims.c_prime, dims.c_prime) = h;
  }
  tr.output = params.W_R() * tr.head_input;
  return tr;
}

// Whole-sequence prediction: N x 2J frames in, (J-1) lengths out. Uses both
// directions when the model is bidirectional, otherwise the forward pass.
inline BoneLengths predict_lengths(const Eigen::MatrixXd& frames, const LengthModelParams& params) {
  if (frames.cols() != params.dims().input_dim())
    throw DimensionMismatch("input width", params.dims().input_dim(), frames.cols());
  return forward_trace(to_steps(frames), params, false).output.col(0);
}

inline BoneLengths forward_bigru(const Eigen::MatrixXd& frames, const LengthModelParams& params) {
  if (!params.dims().bidirectional) throw ValidationError("forward_bigru needs a bidirectional model");
  return predict_lengths(frames, params);
}

inline BoneLengths forward_unidirectional(const Eigen::MatrixXd& frames,
                                          const LengthModelParams& params) {
  if (params.dims().bidirectional)
    throw ValidationError("forward_unidirectional needs a unidirectional model");
  return predict_lengths(frames, params);
}

// Test-time flip: average the prediction on the input and on its mirror
// (with the mirrored prediction's left/right bones swapped back).
inline BoneLengths predict_lengths_flip(const Eigen::MatrixXd& frames,
                                        const LengthModelParams& params,
                                        const SkeletonTopology& topo) {
  const BoneLengths a = predict_lengths(frames, params);
  const BoneLengths b = mirror_lengths(predict_lengths(flip_normalized(frames, topo), params), topo);
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Online (frame-by-frame) variant.

struct OnlineState {
  Eigen::VectorXd h;
  long frames_seen = 0;

  static OnlineState zero(const ModelDims& dims) {
    return {Eigen::VectorXd::Zero(dims.c_prime), 0};
  }
  friend bool operator==(const OnlineState&, const OnlineState&) = default;
};

struct OnlineStep {
  OnlineState state;
  BoneLengths lengths;
};

inline OnlineStep forward_online(const OnlineState& state, const Eigen::VectorXd& x,
                                 const LengthModelParams& params) {
  const auto& dims = params.dims();
  if (dims.bidirectional) throw ValidationError("online inference needs a unidirectional model");
  if (x.size() != dims.input_dim()) throw DimensionMismatch("input width", dims.input_dim(), x.size());
  if (state.h.size() != dims.c_prime)
    throw DimensionMismatch("online hidden state", dims.c_prime, state.h.size());
  // Same operations, in the same order, as forward_trace on a one-column batch.
  const Eigen::MatrixXd xcol = x;
  const Eigen::MatrixXd xp = project_input(xcol, params);
  const Eigen::MatrixXd hcol = state.h;
  const Eigen::MatrixXd h = gru_step(params.gru(0), xp, hcol);
  Eigen::MatrixXd out = params.W_R() * h;
  return {{h.col(0), state.frames_seen + 1}, out.col(0)};
}

// ---------------------------------------------------------------------------
// Loss and exact gradients.

// Mean absolute error over bones.
inline double length_loss(const BoneLengths& pred, const BoneLengths& truth) {
  if (pred.size() != truth.size()) throw DimensionMismatch("bone lengths", truth.size(), pred.size());
  if (pred.size() == 0) throw DimensionMismatch("bone lengths must be non-empty");
  return (pred - truth).cwiseAbs().sum() / static_cast<double>(pred.size());
}

// d|x|/dx with the subgradient at 0 taken as 0.
inline double abs_grad(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct Batch {
  StepInputs steps;         // N entries of 2J x B
  Eigen::MatrixXd targets;  // (J-1) x B
  Eigen::Index size() const noexcept { return targets.cols(); }
};

struct LengthSample {
  Eigen::MatrixXd inputs;  // N x 2J normalized keypoints
  BoneLengths target;
};

inline Batch make_batch(const std::vector<const LengthSample*>& samples) {
  if (samples.empty()) throw ValidationError("empty batch");
  const Eigen::Index n = samples.front()->inputs.rows();
  const Eigen::Index width = samples.front()->inputs.cols();
  const auto batch = static_cast<Eigen::Index>(samples.size());
  Batch out;
  out.steps.assign(static_cast<std::size_t>(n), Eigen::MatrixXd(width, batch));
  out.targets.resize(samples.front()->target.size(), batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& s = *samples[static_cast<std::size_t>(b)];
    if (s.inputs.rows() != n || s.inputs.cols() != width)
      throw DimensionMismatch("batched samples must share one shape");
    for (Eigen::Index t = 0; t < n; ++t) out.steps[t].col(b) = s.inputs.row(t).transpose();
    out.targets.col(b) = s.target;
  }
  return out;
}

inline Batch make_batch(const std::vector<LengthSample>& samples) {
  std::vector<const LengthSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  return make_batch(ptrs);
}

struct LossAndGradient {
  double loss = 0.0;
  LengthModelParams gradient;
};

namespace detail {

// Backpropagate one GRU step; accumulates parameter gradients into `grad`
// and the input gradient into `dxp`, returns the gradient w.r.t. h_prev.
inline Eigen::MatrixXd gru_step_backward(const GruView& g, GruGradView& grad, const GruCache& c,
                                         const Eigen::MatrixXd& xp, const Eigen::MatrixXd& dh,
                                         Eigen::MatrixXd& dxp) {
  const auto z = c.z.array();
  const auto r = c.r.array();
  const auto cand = c.cand.array();
  const auto hp = c.h_prev.array();
  const auto dha = dh.array();

  const Eigen::MatrixXd dah = (dha * z * (1.0 - cand.square())).matrix();
  const Eigen::MatrixXd daz = (dha * (cand - hp) * z * (1.0 - z)).matrix();
  const Eigen::MatrixXd rh = (r * hp).matrix();
  const Eigen::MatrixXd drh = g.Uh.transpose() * dah;
  const Eigen::MatrixXd dar = (drh.array() * hp * r * (1.0 - r)).matrix();

  grad.Wh.noalias() += dah * xp.transpose();
  grad.Uh.noalias() += dah * rh.transpose();
  grad.bh.col(0) += dah.rowwise().sum();
  grad.Wr.noalias() += dar * xp.transpose();
  grad.Ur.noalias() += dar * c.h_prev.transpose();
  grad.br.col(0) += dar.rowwise().sum();
  grad.Wz.noalias() += daz * xp.transpose();
  grad.Uz.noalias() += daz * c.h_prev.transpose();
  grad.bz.col(0) += daz.rowwise().sum();

  dxp.noalias() += g.Wz.transpose() * daz;
  dxp.noalias() += g.Wr.transpose() * dar;
  dxp.noalias() += g.Wh.transpose() * dah;

  Eigen::MatrixXd dprev = (dha * (1.0 - z) + drh.array() * r).matrix();
  dprev.noalias() += g.Ur.transpose() * dar;
  dprev.noalias() += g.Uz.transpose() * daz;
  return dprev;
}

}  // namespace detail

// Mean batch loss and its gradient w.r.t. every parameter tensor.
inline LossAndGradient loss_and_gradient(const LengthModelParams& params, const Batch& batch) {
  const auto& dims = params.dims();
  if (batch.targets.rows() != dims.output_dim())
    throw DimensionMismatch("target width", dims.output_dim(), batch.targets.rows());
  const ForwardTrace tr = forward_trace(batch.steps, params, true);
  const double scale = 1.0 / static_cast<double>(dims.output_dim() * batch.size());
  const Eigen::MatrixXd diff = tr.output - batch.targets;

  LossAndGradient out{diff.cwiseAbs().sum() * scale, params.zeros_like()};
  LengthModelParams& grad = out.gradient;
  const Eigen::MatrixXd dout = diff.unaryExpr([](double v) { return abs_grad(v); }) * scale;

  grad.tensor(grad.slots().size() - 1).noalias() += dout * tr.head_input.transpose();
  const Eigen::MatrixXd dhead = params.W_R().transpose() * dout;

  const long n = static_cast<long>(batch.steps.size());
  std::vector<Eigen::MatrixXd> dxp(static_cast<std::size_t>(n),
                                   Eigen::MatrixXd::Zero(dims.c, batch.size()));
  for (int d = 0; d < dims.directions(); ++d) {
    const GruView g = params.gru(d);
    GruGradView gg = grad.gru_mut(d);
    Eigen::MatrixXd dh = dhead.middleRows(static_cast<Eigen::Index>(d) * dims.c_prime, dims.c_prime);
    for (long k = n - 1; k >= 0; --k) {
      const long t = d == 0 ? k : n - 1 - k;
      dh = detail::gru_step_backward(g, gg, tr.caches[d][k], tr.projected[t], dh, dxp[t]);
    }
  }
  MutMap dWp = grad.tensor(std::size_t{0});
  MutMap dbp = grad.tensor(std::size_t{1});
  for (long t = 0; t < n; ++t) {
    dWp.noalias() += dxp[t] * batch.steps[t].transpose();
    dbp.col(0) += dxp[t].rowwise().sum();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  int sequence_length = 512;
  int batch_size = 256;
  double learning_rate = 1e-4;
  double lr_decay = 0.95;
  int epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool flip = true;

  void validate() const {
    if (sequence_length < 1) throw ValidationError("train: sequence_length must be >= 1");
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("train: lr_decay must be in (0, 1]");
    if (!(learning_rate >= 0.0)) throw ValidationError("train: learning_rate must be >= 0");
    if (epochs < 0) throw ValidationError("train: epochs must be >= 0");
  }
};

inline double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
}

class Adam {
 public:
  Adam(Eigen::Index size, double beta1, double beta2, double eps)
      : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)),
        beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const noexcept { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

// Cut each sequence into consecutive windows of `length` frames; a trailing
// partial window is dropped rather than padded.
inline std::vector<LengthSample> slice_samples(const std::vector<LengthSample>& sequences,
                                               int length) {
  std::vector<LengthSample> out;
  for (const auto& s : sequences) {
    for (Eigen::Index start = 0; start + length <= s.inputs.rows(); start += length)
      out.push_back({s.inputs.middleRows(start, length), s.target});
  }
  return out;
}

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN when no validation data
};

struct TrainResult {
  LengthModelParams params;
  std::vector<EpochLog> log;
};

// Produces the (unsliced) training sequences for an epoch; called once per
// epoch so augmentation can redraw lengths and shifts.
using SampleSource = std::function<std::vector<LengthSample>(int epoch)>;

// Validation error (mean per-sequence length loss), with test-time flip
// averaging when enabled.
inline double validation_loss(const LengthModelParams& params,
                              const std::vector<LengthSample>& validation,
                              const SkeletonTopology& topo, bool flip) {
  if (validation.empty()) return std::nan("");
  double sum = 0.0;
  for (const auto& s : validation) {
    const BoneLengths pred =
        flip ? predict_lengths_flip(s.inputs, params, topo) : predict_lengths(s.inputs, params);
    sum += length_loss(pred, s.target);
  }
  return sum / static_cast<double>(validation.size());
}

// Adam with lr_e = lr_0 * decay^e. Windows are shuffled with the config seed,
// batches are reduced in column order, so a run is reproducible bit for bit.
// With flip on, every batch also carries the mirrored copy of each window.
inline TrainResult train(LengthModelParams params, const SampleSource& source,
                         const std::vector<LengthSample>& validation, const TrainConfig& cfg,
                         const SkeletonTopology& topo) {
  cfg.validate();
  if (params.dims().joints != topo.joint_count())
    throw DimensionMismatch("model joint count", topo.joint_count(), params.dims().joints);
  Rng order_rng(cfg.seed ^ 0x5eedULL);
  Adam adam(params.size(), cfg.beta1, cfg.beta2, cfg.epsilon);
  TrainResult result;
  long batch_index = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto windows = slice_samples(source(epoch), cfg.sequence_length);
    if (windows.empty()) throw ValidationError("train: no sequence is long enough to slice");
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng.engine());

    const double lr = learning_rate_at(cfg, epoch);
    double loss_sum = 0.0;
    long loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<LengthSample> flipped;
      std::vector<const LengthSample*> members;
      for (std::size_t i = start; i < stop; ++i) members.push_back(&windows[order[i]]);
      if (cfg.flip) {
        flipped.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
          const auto& w = windows[order[i]];
          flipped.push_back({flip_normalized(w.inputs, topo), mirror_lengths(w.target, topo)});
        }
        for (const auto& f : flipped) members.push_back(&f);
      }
      const Batch batch = make_batch(members);
      const LossAndGradient lg = loss_and_gradient(params, batch);
      if (!std::isfinite(lg.loss) || !lg.gradient.flat().allFinite()) throw NonFiniteLoss(batch_index);
      adam.step(params.flat(), lg.gradient.flat(), lr);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      loss_count += batch.size();
      ++batch_index;
    }
    result.log.push_back({epoch, lr, loss_sum / static_cast<double>(loss_count),
                          validation_loss(params, validation, topo, cfg.flip)});
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train(LengthModelParams params, const std::vector<LengthSample>& dataset,
                         const std::vector<LengthSample>& validation, const TrainConfig& cfg,
                         const SkeletonTopology& topo) {
  if (dataset.empty()) throw ValidationError("train: empty dataset");
  return train(std::move(params), [&](int) { return dataset; }, validation, cfg, topo);
}

}  // namespace blapose

#pragma once

#include <algorithm>
#include <bit>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "ngdf/se3.hpp"

namespace ngdf {

struct FieldShape {
  int hidden_layers = 5;
  int width = 256;
  int latent_dim = 64;
  int outputs = 6;

  int input_dim() const { return latent_dim + 7; }
  int num_linear() const { return hidden_layers + 1; }
  int layer_in(int l) const { return l == 0 ? input_dim() : width; }
  int layer_out(int l) const { return l == hidden_layers ? outputs : width; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < num_linear(); ++l) n += static_cast<std::size_t>(layer_out(l)) * (layer_in(l) + 1);
    return n;
  }
};

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMap = Eigen::Map<RowMajorMatrix>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;

/// Gradients of a scalar with respect to every input of the field.
struct FieldGradients {
  Eigen::VectorXd params;  // same layout as FieldModel::params()
  Eigen::VectorXd code;
  Vec7 query = Vec7::Zero();
};

/// Latent code and query pose in, per-control-point distances out.
///
/// Input is code ⊕ position ⊕ quaternion (w, x, y, z). Hidden layers are
/// rectified linear; the output layer is softplus so every output is > 0.
///
/// Parameters live in one flat buffer: for each linear layer in order, the
/// weight matrix (out x in, row-major) followed by its bias. Latent codes are
/// stored separately, one contiguous column of `latent_dim` per object.
class FieldModel {
 public:
  FieldModel() = default;

  FieldModel(const FieldShape& shape, int num_objects)
      : shape_(shape),
        params_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.parameter_count()))),
        codes_(Eigen::MatrixXd::Zero(shape.latent_dim, num_objects)) {
    if (shape.hidden_layers < 1 || shape.width < 1 || shape.latent_dim < 0 || shape.outputs < 1)
      throw std::invalid_argument("bad field shape");
    if (num_objects < 1) throw std::invalid_argument("field needs at least one object");
    std::size_t off = 0;
    for (int l = 0; l < shape_.num_linear(); ++l) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(shape_.layer_out(l)) * (shape_.layer_in(l) + 1);
    }
  }

  /// He-normal hidden weights, small output weights, zero biases, codes
  /// drawn from N(0, 0.01^2).
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int l = 0; l < shape_.num_linear(); ++l) {
      const double scale = (l == shape_.hidden_layers ? 1.0 : 2.0) / shape_.layer_in(l);
      auto W = weight(l);
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = std::sqrt(scale) * normal(rng);
      bias(l).setZero();
    }
    for (Eigen::Index i = 0; i < codes_.size(); ++i) codes_.data()[i] = 0.01 * normal(rng);
  }

  const FieldShape& shape() const { return shape_; }
  int num_objects() const { return static_cast<int>(codes_.cols()); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::MatrixXd& codes() { return codes_; }
  const Eigen::MatrixXd& codes() const { return codes_; }

  WeightMap weight(int l) {
    return WeightMap(params_.data() + offsets_[l], shape_.layer_out(l), shape_.layer_in(l));
  }
  ConstWeightMap weight(int l) const {
    return ConstWeightMap(params_.data() + offsets_[l], shape_.layer_out(l), shape_.layer_in(l));
  }
  Eigen::Map<Eigen::VectorXd> bias(int l) {
    return {params_.data() + offsets_[l] + shape_.layer_out(l) * shape_.layer_in(l), shape_.layer_out(l)};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int l) const {
    return {params_.data() + offsets_[l] + shape_.layer_out(l) * shape_.layer_in(l), shape_.layer_out(l)};
  }

  void check_object(int object_id) const {
    if (object_id < 0 || object_id >= num_objects())
      throw std::out_of_range("unknown object id " + std::to_string(object_id));
  }

  /// Network input column for one query.
  Eigen::VectorXd input(int object_id, const Pose& q) const {
    check_object(object_id);
    Eigen::VectorXd x(shape_.input_dim());
    x.head(shape_.latent_dim) = codes_.col(object_id);
    x.tail<7>() = q.to_vector();
    return x;
  }

  /// Activations for a batch of inputs (one column each). `pre[l]` holds the
  /// pre-activation of layer l; the returned matrix is the softplus output.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& X, std::vector<Eigen::MatrixXd>* pre = nullptr) const {
    Eigen::MatrixXd h = X;
    if (pre) pre->clear();
    for (int l = 0; l < shape_.num_linear(); ++l) {
      Eigen::MatrixXd z = weight(l) * h;
      z.colwise() += bias(l);
      if (pre) pre->push_back(z);
      if (l < shape_.hidden_layers)
        h = z.cwiseMax(0.0);
      else
        h = z.unaryExpr([](double v) { return softplus(v); });
    }
    return h;
  }

  /// Reverse pass given dLoss/dOutput for each column. Accumulates parameter
  /// gradients into `dparams` when given and returns dLoss/dInput (one
  /// column per input).
  Eigen::MatrixXd backward_batch(const Eigen::MatrixXd& X, const std::vector<Eigen::MatrixXd>& pre,
                                 const Eigen::MatrixXd& dout, Eigen::VectorXd* dparams) const {
    Eigen::MatrixXd delta = dout.cwiseProduct(pre.back().unaryExpr([](double v) { return sigmoid(v); }));
    for (int l = shape_.hidden_layers; l >= 0; --l) {
      if (dparams) {
        const std::size_t off = offsets_[l];
        const int rows = shape_.layer_out(l), cols = shape_.layer_in(l);
        WeightMap dW(dparams->data() + off, rows, cols);
        Eigen::Map<Eigen::VectorXd> db(dparams->data() + off + rows * cols, rows);
        if (l == 0)
          dW.noalias() += delta * X.transpose();
        else
          dW.noalias() += delta * pre[l - 1].cwiseMax(0.0).transpose();
        db += delta.rowwise().sum();
      }
      Eigen::MatrixXd dh = weight(l).transpose() * delta;
      if (l == 0) return dh;
      delta = dh.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return {};
  }

 private:
  FieldShape shape_;
  Eigen::VectorXd params_;
  Eigen::MatrixXd codes_;
  std::vector<std::size_t> offsets_;
};

/// Per-control-point distances predicted for q.
inline Eigen::VectorXd forward(const FieldModel& model, int object_id, const Pose& q) {
  return model.forward_batch(model.input(object_id, q)).col(0);
}

inline double loss_l1(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("loss_l1: length mismatch");
  return (pred - target).cwiseAbs().sum();
}

/// Gradients of `scalar(forward(q))` where dscalar/doutput = `dout`.
inline FieldGradients backward_with(const FieldModel& model, int object_id, const Pose& q,
                                    const Eigen::VectorXd& dout) {
  const Eigen::MatrixXd X = model.input(object_id, q);
  std::vector<Eigen::MatrixXd> pre;
  model.forward_batch(X, &pre);
  FieldGradients g;
  g.params = Eigen::VectorXd::Zero(model.params().size());
  const Eigen::VectorXd dx = model.backward_batch(X, pre, dout, &g.params).col(0);
  g.code = dx.head(model.shape().latent_dim);
  g.query = dx.tail<7>();
  return g;
}

/// Gradients of loss_l1(forward(q), target). The subgradient of |0| is 0.
inline FieldGradients backward(const FieldModel& model, int object_id, const Pose& q,
                               const Eigen::VectorXd& target) {
  const Eigen::VectorXd pred = forward(model, object_id, q);
  if (pred.size() != target.size()) throw std::invalid_argument("backward: target length mismatch");
  const Eigen::VectorXd dout = (pred - target).unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
  return backward_with(model, object_id, q, dout);
}

/// Mean output and its gradient with respect to the 7 raw query inputs.
struct FieldEval {
  double value = 0.0;
  Vec7 grad = Vec7::Zero();
};

/// Anything that maps (object, pose) to a mean distance and its gradient.
template <class F>
concept DistanceField = requires(const F& f, int id, const Pose& q) {
  { f.evaluate(id, q) } -> std::same_as<FieldEval>;
  { f.value(id, q) } -> std::convertible_to<double>;
};

/// Adapts a trained model to the distance-field interface used by the
/// planner and the level-set optimizer.
class NeuralField {
 public:
  explicit NeuralField(const FieldModel& model) : model_(&model) {}
  NeuralField(FieldModel&&) = delete;  // the field keeps a pointer to the model

  FieldEval evaluate(int object_id, const Pose& q) const {
    const Eigen::Index n = model_->shape().outputs;
    const Eigen::VectorXd dout = Eigen::VectorXd::Constant(n, 1.0 / n);
    const Eigen::MatrixXd X = model_->input(object_id, q);
    std::vector<Eigen::MatrixXd> pre;
    const Eigen::VectorXd y = model_->forward_batch(X, &pre).col(0);
    FieldEval e;
    e.value = y.cwiseAbs().mean();
    e.grad = model_->backward_batch(X, pre, dout, nullptr).col(0).tail<7>();
    return e;
  }

  double value(int object_id, const Pose& q) const { return forward(*model_, object_id, q).cwiseAbs().mean(); }

 private:
  const FieldModel* model_;
};

// Checkpoint layout (little-endian):
//   "NGDF0001"
//   int32 hidden_layers, int32 width, int32 latent_dim, int32 outputs
//   float64 params[parameter_count]   (flat layout documented on FieldModel)
//   float64 codes[num_objects * latent_dim], object-major
// The object count is implied by the remaining file size.

namespace detail {
template <class T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}
template <class T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("checkpoint: truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}
}  // namespace detail

inline void write_checkpoint(std::ostream& out, const FieldModel& model) {
  out.write("NGDF0001", 8);
  const FieldShape& s = model.shape();
  for (int v : {s.hidden_layers, s.width, s.latent_dim, s.outputs}) detail::write_le<std::int32_t>(out, v);
  for (Eigen::Index i = 0; i < model.params().size(); ++i) detail::write_le<double>(out, model.params()[i]);
  for (Eigen::Index i = 0; i < model.codes().size(); ++i) detail::write_le<double>(out, model.codes().data()[i]);
}

inline FieldModel read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "NGDF0001", 8) != 0) throw std::runtime_error("checkpoint: bad magic");
  FieldShape s;
  s.hidden_layers = detail::read_le<std::int32_t>(in);
  s.width = detail::read_le<std::int32_t>(in);
  s.latent_dim = detail::read_le<std::int32_t>(in);
  s.outputs = detail::read_le<std::int32_t>(in);
  if (s.hidden_layers < 1 || s.width < 1 || s.latent_dim < 0 || s.outputs < 1 || s.width > (1 << 16))
    throw std::runtime_error("checkpoint: bad shape");
  std::vector<double> params(s.parameter_count());
  for (auto& p : params) p = detail::read_le<double>(in);
  std::vector<double> codes;
  while (in.peek() != std::char_traits<char>::eof()) codes.push_back(detail::read_le<double>(in));
  const int dim = std::max(1, s.latent_dim);
  if (codes.size() % dim != 0 || (s.latent_dim > 0 && codes.empty()))
    throw std::runtime_error("checkpoint: code block size mismatch");
  // With a zero-dimensional code the object count is not recoverable; assume one.
  const int objects = s.latent_dim > 0 ? static_cast<int>(codes.size() / dim) : 1;
  FieldModel model(s, objects);
  model.params() = Eigen::Map<Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
  if (!codes.empty()) model.codes() = Eigen::Map<Eigen::MatrixXd>(codes.data(), s.latent_dim, objects);
  return model;
}

inline void save_checkpoint(const std::string& path, const FieldModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_checkpoint(out, model);
}

inline FieldModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace ngdf

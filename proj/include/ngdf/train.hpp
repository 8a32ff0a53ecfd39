#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ngdf/adam.hpp"
#include "ngdf/field.hpp"
#include "ngdf/grasp_oracle.hpp"
#include "ngdf/parallel.hpp"

namespace ngdf {

struct TrainConfig {
  FieldShape shape;             // `outputs` is taken from the dataset
  double learning_rate = 1e-3;  // cosine-annealed to learning_rate * final_lr_factor
  double final_lr_factor = 0.02;
  double code_learning_rate = 1e-3;
  AdamParams adam;
  int batch_size = 256;
  int epochs = 60;
  double aug_probability = 0.7;
  double val_fraction = 0.1;
  int oracle_density = 4096;  // manifold sampling used to relabel augmented queries
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0) || !(code_learning_rate > 0) || !(final_lr_factor > 0))
      throw std::invalid_argument("learning rates must be positive");
    if (batch_size < 1 || epochs < 1) throw std::invalid_argument("batch size and epochs must be >= 1");
    if (!(aug_probability >= 0 && aug_probability <= 1))
      throw std::invalid_argument("augmentation probability must be in [0, 1]");
    if (!(val_fraction >= 0 && val_fraction < 1)) throw std::invalid_argument("validation fraction must be in [0, 1)");
    if (oracle_density < 1) throw std::invalid_argument("oracle density must be >= 1");
  }
};

struct EpochMetrics {
  int epoch = 0;
  double train_l1 = 0.0;  // mean per-record L1 over the epoch's batches
  double val_l1 = 0.0;    // mean per-record L1 on the held-out split
  double val_mae = 0.0;   // mean |mean(pred) - mean(target)| on the held-out split
};

struct TrainResult {
  FieldModel model;
  std::vector<EpochMetrics> curve;
  std::vector<double> step_losses;  // batch loss at every optimizer step
  std::vector<DatasetRecord> validation;
};

/// Held-out errors of `model` on `records`: (mean per-record L1, mean
/// absolute error of the mean distance).
inline std::pair<double, double> evaluate_records(const FieldModel& model, const std::vector<DatasetRecord>& records) {
  if (records.empty()) return {0.0, 0.0};
  double l1 = 0.0, mae = 0.0;
  constexpr std::size_t chunk = 1024;
  for (std::size_t begin = 0; begin < records.size(); begin += chunk) {
    const std::size_t end = std::min(records.size(), begin + chunk);
    Eigen::MatrixXd X(model.shape().input_dim(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) X.col(i - begin) = model.input(records[i].object_id, records[i].query);
    const Eigen::MatrixXd Y = model.forward_batch(X);
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::VectorXd& t = records[i].target_distances;
      l1 += loss_l1(Y.col(i - begin), t);
      mae += std::abs(Y.col(i - begin).mean() - t.mean());
    }
  }
  return {l1 / records.size(), mae / records.size()};
}

namespace detail {

inline bool record_less(const DatasetRecord& a, const DatasetRecord& b) {
  if (a.object_id != b.object_id) return a.object_id < b.object_id;
  const Vec7 va = a.query.to_vector(), vb = b.query.to_vector();
  for (int k = 0; k < 7; ++k)
    if (va[k] != vb[k]) return va[k] < vb[k];
  const auto& ta = a.target_distances;
  const auto& tb = b.target_distances;
  return std::lexicographical_compare(ta.data(), ta.data() + ta.size(), tb.data(), tb.data() + tb.size());
}

/// Rotation about `axis` through `center`, applied on the left of `q`.
inline Pose rotate_about(const Pose& q, const Vec3& center, const Vec3& axis, double angle) {
  const Pose to = Pose::from_translation(center);
  const Pose rot = Pose::from_axis_angle(axis, angle);
  return compose(compose(to, rot), compose(inverse(to), q));
}

}  // namespace detail

/// Auto-decoder training: network weights and per-object latent codes are
/// fit jointly with Adam on the L1 loss.
///
/// Records are put in a canonical order first, so the result does not depend
/// on the order of `dataset`. With probability aug_probability per record and
/// epoch, the query is rotated about the manifold's symmetry axis through its
/// centroid and relabelled against the rotated manifold; records of objects
/// without a symmetry axis are never rotated. `manifolds[k]` describes
/// object k and may be empty when aug_probability is 0.
inline TrainResult train(std::vector<DatasetRecord> dataset, const std::vector<GraspManifold>& manifolds,
                         const ControlPointSet& cps, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  const Eigen::Index outputs = dataset.front().target_distances.size();
  int num_objects = 0;
  for (const auto& r : dataset) {
    if (r.target_distances.size() != outputs) throw std::invalid_argument("records disagree on distance count");
    if (r.object_id < 0) throw std::invalid_argument("negative object id");
    num_objects = std::max(num_objects, r.object_id + 1);
  }
  if (cfg.aug_probability > 0 && static_cast<int>(manifolds.size()) < num_objects)
    throw std::invalid_argument("augmentation needs a manifold for every object");
  if (static_cast<std::size_t>(outputs) != cps.size())
    throw std::invalid_argument("dataset distance count does not match the control point set");

  std::stable_sort(dataset.begin(), dataset.end(), detail::record_less);

  // Held-out split from a seeded permutation of the canonical order.
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(cfg.seed, 0x5117));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * dataset.size()));
  if (n_val >= dataset.size()) n_val = dataset.size() - 1;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  TrainResult out;
  for (auto i : val_idx) out.validation.push_back(dataset[i]);

  FieldShape shape = cfg.shape;
  shape.outputs = static_cast<int>(outputs);
  FieldModel model(shape, num_objects);
  model.initialize(derive_seed(cfg.seed, 1));
  {
    double mean_target = 0.0;
    for (auto i : train_idx) mean_target += dataset[i].target_distances.mean();
    mean_target = std::max(1e-3, mean_target / train_idx.size());
    model.bias(shape.hidden_layers).setConstant(std::log(std::expm1(mean_target)));
  }

  std::vector<GraspOracle> oracles;
  std::vector<std::optional<Vec3>> axes;
  if (cfg.aug_probability > 0) {
    for (int k = 0; k < num_objects; ++k) {
      oracles.emplace_back(manifolds[k], cps, cfg.oracle_density);
      axes.push_back(manifolds[k].symmetry_axis());
    }
  }

  AdamState param_adam, code_adam;
  const std::size_t n_train = train_idx.size();
  std::vector<DatasetRecord> epoch_records(n_train);
  std::vector<std::size_t> perm(n_train);
  const long total_steps = static_cast<long>(cfg.epochs) * static_cast<long>((n_train + cfg.batch_size - 1) / cfg.batch_size);
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
    parallel_for(n_train, [&](std::size_t j) {
      const DatasetRecord& src = dataset[train_idx[j]];
      DatasetRecord& dst = epoch_records[j];
      dst = src;
      if (cfg.aug_probability <= 0) return;
      std::mt19937_64 rng(derive_seed(epoch_seed, train_idx[j]));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double draw = u(rng);
      const double angle = 2.0 * std::numbers::pi * u(rng);
      const auto& axis = axes[src.object_id];
      if (draw >= cfg.aug_probability || !axis) return;
      dst.query = detail::rotate_about(src.query, manifolds[src.object_id].centroid(), *axis, angle);
      dst.target_distances = oracles[src.object_id].nearest(dst.query).distances;
    });

    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 shuffle_rng(epoch_seed);
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n_train; begin += cfg.batch_size) {
      const std::size_t end = std::min(n_train, begin + cfg.batch_size);
      const Eigen::Index B = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd X(shape.input_dim(), B);
      Eigen::MatrixXd Y(outputs, B);
      for (Eigen::Index c = 0; c < B; ++c) {
        const DatasetRecord& r = epoch_records[perm[begin + c]];
        X.col(c) = model.input(r.object_id, r.query);
        Y.col(c) = r.target_distances;
      }
      std::vector<Eigen::MatrixXd> pre;
      const Eigen::MatrixXd P = model.forward_batch(X, &pre);
      const Eigen::MatrixXd diff = P - Y;
      const double batch_loss = diff.cwiseAbs().sum() / B;
      epoch_loss += diff.cwiseAbs().sum();
      out.step_losses.push_back(batch_loss);
      const Eigen::MatrixXd dout = diff.unaryExpr([](double v) { return double((v > 0) - (v < 0)); }) / double(B);
      Eigen::VectorXd dparams = Eigen::VectorXd::Zero(model.params().size());
      const Eigen::MatrixXd dX = model.backward_batch(X, pre, dout, &dparams);
      Eigen::MatrixXd dcodes = Eigen::MatrixXd::Zero(shape.latent_dim, num_objects);
      for (Eigen::Index c = 0; c < B; ++c)
        dcodes.col(epoch_records[perm[begin + c]].object_id) += dX.col(c).head(shape.latent_dim);

      const double progress = total_steps > 1 ? double(step) / double(total_steps - 1) : 1.0;
      const double factor = cfg.final_lr_factor + (1.0 - cfg.final_lr_factor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      model.params() -= param_adam.step(dparams, cfg.learning_rate * factor, cfg.adam).matrix();
      if (shape.latent_dim > 0) model.codes() -= code_adam.step(dcodes, cfg.code_learning_rate * factor, cfg.adam).matrix();
      ++step;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_l1 = epoch_loss / n_train;
    std::tie(m.val_l1, m.val_mae) = evaluate_records(model, out.validation);
    out.curve.push_back(m);
  }
  out.model = std::move(model);
  return out;
}

/// `epoch train_l1 val_l1 val_mae`, one line per epoch after a header.
inline void write_metrics(std::ostream& out, const std::vector<EpochMetrics>& curve) {
  out << "# epoch train_l1 val_l1 val_mae\n";
  char buf[128];
  for (const auto& m : curve) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g\n", m.epoch, m.train_l1, m.val_l1, m.val_mae);
    out << buf;
  }
}

}  // namespace ngdf

#pragma once

#include <cmath>

#include <Eigen/Core>

namespace ngdf {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates for a block of parameters of any shape.
struct AdamState {
  Eigen::ArrayXXd m;
  Eigen::ArrayXXd v;
  long t = 0;

  void reset(Eigen::Index rows, Eigen::Index cols) {
    m = Eigen::ArrayXXd::Zero(rows, cols);
    v = Eigen::ArrayXXd::Zero(rows, cols);
    t = 0;
  }

  /// Bias-corrected step for gradient `g`; the caller subtracts it.
  template <class Derived>
  Eigen::ArrayXXd step(const Eigen::DenseBase<Derived>& g, double lr, const AdamParams& p) {
    if (m.rows() != g.rows() || m.cols() != g.cols()) reset(g.rows(), g.cols());
    ++t;
    const Eigen::ArrayXXd ga = g.derived().array();
    m = p.beta1 * m + (1.0 - p.beta1) * ga;
    v = p.beta2 * v + (1.0 - p.beta2) * ga.square();
    const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
    return lr * (m / c1) / ((v / c2).sqrt() + p.epsilon);
  }
};

}  // namespace ngdf

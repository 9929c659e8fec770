#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "extrap/errors.hpp"

namespace extrap {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer over a flat parameter vector, with bias
// correction.
class Adam {
 public:
  Adam(Eigen::Index dim, AdamConfig cfg)
      : cfg_(cfg),
        m_(Eigen::VectorXd::Zero(dim)),
        v_(Eigen::VectorXd::Zero(dim)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    if (theta.size() != m_.size() || grad.size() != m_.size()) {
      throw ContractError("Adam: shape mismatch");
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_.array() = cfg_.beta2 * v_.array() + (1.0 - cfg_.beta2) * grad.array().square();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    theta.array() -=
        cfg_.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace extrap

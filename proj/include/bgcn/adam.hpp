#pragma once

#include "bgcn/common.hpp"

#include <cmath>
#include <vector>

namespace bgcn {

// Adam with bias correction. Parameters are addressed by slot index so that
// one optimizer instance can drive an arbitrary list of matrices.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void begin_step() { ++t_; }
  long steps() const { return t_; }

  void update(std::size_t slot, MatrixXd& param, const MatrixXd& grad, double learning_rate) {
    if (slot >= first_.size()) {
      first_.resize(slot + 1);
      second_.resize(slot + 1);
    }
    MatrixXd& m = first_[slot];
    MatrixXd& v = second_[slot];
    if (m.size() == 0) {
      m = MatrixXd::Zero(param.rows(), param.cols());
      v = MatrixXd::Zero(param.rows(), param.cols());
    }
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    param.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
  }

 private:
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
  std::vector<MatrixXd> first_;
  std::vector<MatrixXd> second_;
};

}  // namespace bgcn

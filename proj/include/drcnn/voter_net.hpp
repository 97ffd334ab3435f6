#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "drcnn/error.hpp"
#include "drcnn/random.hpp"

namespace drcnn {

inline constexpr int kDefaultHidden = 20;
inline constexpr double kProbabilityClamp = 1e-12;

/// One voter: a ReLU hidden layer feeding a single sigmoid output.
template <typename Scalar>
struct VoterNet {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix w1;  // hidden x inputs
  Vector b1;  // hidden
  Vector w2;  // hidden
  Scalar b2 = Scalar(0);

  Eigen::Index inputs() const { return w1.cols(); }
  Eigen::Index hidden() const { return w1.rows(); }

  static VoterNet zeros(Eigen::Index inputs, Eigen::Index hidden = kDefaultHidden) {
    return {Matrix::Zero(hidden, inputs), Vector::Zero(hidden), Vector::Zero(hidden), Scalar(0)};
  }

  bool operator==(const VoterNet& o) const {
    return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
  }
};

/// Gradients share the parameter layout.
template <typename Scalar>
using VoterGradient = VoterNet<Scalar>;

struct LossConfig {
  double w0 = 1.0;  // negative class
  double w1 = 10.0;  // positive class
};

/// Glorot-uniform weights, zero biases.
template <typename Scalar>
VoterNet<Scalar> init_voter(Eigen::Index inputs, Eigen::Index hidden, Rng& rng) {
  auto net = VoterNet<Scalar>::zeros(inputs, hidden);
  const double a1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
  for (Eigen::Index j = 0; j < inputs; ++j) {
    for (Eigen::Index i = 0; i < hidden; ++i) net.w1(i, j) = static_cast<Scalar>(rng.uniform(-a1, a1));
  }
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (Eigen::Index i = 0; i < hidden; ++i) net.w2(i) = static_cast<Scalar>(rng.uniform(-a2, a2));
  return net;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
struct ForwardResult {
  typename VoterNet<Scalar>::Vector hidden;
  Scalar p;
};

template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const VoterNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != net.inputs()) throw ValidationError("forward: input width mismatch");
  if (!x.allFinite()) throw ValidationError("forward: non-finite input");
  ForwardResult<Scalar> out;
  out.hidden = (net.w1 * x + net.b1).cwiseMax(Scalar(0));
  out.p = sigmoid<Scalar>(net.w2.dot(out.hidden) + net.b2);
  return out;
}

/// Probabilities for a batch, one sample per row.
template <typename Scalar, typename Derived>
typename VoterNet<Scalar>::Vector forward_batch(const VoterNet<Scalar>& net,
                                                const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != net.inputs()) throw ValidationError("forward: input width mismatch");
  using Matrix = typename VoterNet<Scalar>::Matrix;
  const Matrix h = ((x * net.w1.transpose()).rowwise() + net.b1.transpose()).cwiseMax(Scalar(0));
  typename VoterNet<Scalar>::Vector z = h * net.w2;
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid<Scalar>(z(i) + net.b2);
  return z;
}

/// Weighted cross-entropy of one prediction; p is clamped away from 0 and 1.
template <typename Scalar>
Scalar sample_loss(Scalar p, bool y, const LossConfig& cfg) {
  const Scalar pc = std::clamp(p, Scalar(kProbabilityClamp), Scalar(1.0 - kProbabilityClamp));
  return y ? -Scalar(cfg.w1) * std::log(pc) : -Scalar(cfg.w0) * std::log(Scalar(1) - pc);
}

/// dLoss/dz at the output pre-activation.
template <typename Scalar>
Scalar output_delta(Scalar p, bool y, const LossConfig& cfg) {
  return y ? Scalar(cfg.w1) * (p - Scalar(1)) : Scalar(cfg.w0) * p;
}

/// Exact gradient of sample_loss(forward(net, x)) for one sample. The ReLU
/// derivative at 0 is taken as 0.
template <typename Scalar, typename Derived>
VoterGradient<Scalar> backward(const VoterNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                               bool y, const LossConfig& cfg) {
  const ForwardResult<Scalar> f = forward(net, x);
  const Scalar d2 = output_delta(f.p, y, cfg);
  VoterGradient<Scalar> g;
  g.w2 = d2 * f.hidden;
  g.b2 = d2;
  g.b1 = (d2 * net.w2).cwiseProduct(
      f.hidden.unaryExpr([](Scalar h) { return h > Scalar(0) ? Scalar(1) : Scalar(0); }));
  g.w1 = g.b1 * x.transpose();
  return g;
}

/// Mean gradient and summed loss over a batch (one sample per row).
template <typename Scalar, typename Derived>
Scalar batch_gradient(const VoterNet<Scalar>& net, const Eigen::MatrixBase<Derived>& x,
                      const std::vector<char>& y, const LossConfig& cfg, VoterGradient<Scalar>& g) {
  using Matrix = typename VoterNet<Scalar>::Matrix;
  using Vector = typename VoterNet<Scalar>::Vector;
  const Eigen::Index n = x.rows();
  const Matrix pre = (x * net.w1.transpose()).rowwise() + net.b1.transpose();
  const Matrix h = pre.cwiseMax(Scalar(0));
  const Vector z = h * net.w2;
  Vector delta(n);
  Scalar loss = Scalar(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar p = sigmoid<Scalar>(z(i) + net.b2);
    const bool label = y[static_cast<std::size_t>(i)] != 0;
    loss += sample_loss(p, label, cfg);
    delta(i) = output_delta(p, label, cfg);
  }
  const Scalar inv = Scalar(1) / static_cast<Scalar>(n);
  g.w2.noalias() = h.transpose() * delta * inv;
  g.b2 = delta.sum() * inv;
  Matrix d1 = (delta * net.w2.transpose()).cwiseProduct(
      pre.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }));
  g.w1.noalias() = d1.transpose() * x * inv;
  g.b1 = d1.colwise().sum().transpose() * inv;
  return loss;
}

/// Adam with bias correction over the four parameter blocks of a voter.
template <typename Scalar>
struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  VoterGradient<Scalar> m;
  VoterGradient<Scalar> v;

  static AdamState for_net(const VoterNet<Scalar>& net, double learning_rate = 0.001) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.m = VoterNet<Scalar>::zeros(net.inputs(), net.hidden());
    s.v = VoterNet<Scalar>::zeros(net.inputs(), net.hidden());
    return s;
  }
};

template <typename Scalar>
void adam_step(AdamState<Scalar>& s, VoterNet<Scalar>& net, const VoterGradient<Scalar>& g) {
  if (g.w1.rows() != net.w1.rows() || g.w1.cols() != net.w1.cols() || s.m.w1.rows() != net.w1.rows() ||
      s.m.w1.cols() != net.w1.cols()) {
    throw ValidationError("adam_step: shape mismatch");
  }
  ++s.step;
  const Scalar b1 = Scalar(s.beta1);
  const Scalar b2 = Scalar(s.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(s.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(s.step));
  const Scalar lr = Scalar(s.learning_rate);
  const Scalar eps = Scalar(s.epsilon);

  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    param -= (lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
  };
  update(net.w1, s.m.w1, s.v.w1, g.w1);
  update(net.b1, s.m.b1, s.v.b1, g.b1);
  update(net.w2, s.m.w2, s.v.w2, g.w2);

  s.m.b2 = b1 * s.m.b2 + (Scalar(1) - b1) * g.b2;
  s.v.b2 = b2 * s.v.b2 + (Scalar(1) - b2) * g.b2 * g.b2;
  net.b2 -= lr * (s.m.b2 / c1) / (std::sqrt(s.v.b2 / c2) + eps);
}

}  // namespace drcnn

#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include <Eigen/Core>
#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/random.hpp"

namespace hydra {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Numerically stable softmax of a column vector.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Two-layer perceptron input -> hidden (ReLU) -> actions. The raw outputs are
/// action values; scores() applies the softmax used for selection.
/// States are passed as columns.
template <typename Scalar>
class QNetwork {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  struct Gradients {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
  };

  QNetwork() = default;

  /// Zero-initialised network.
  QNetwork(Eigen::Index input, Eigen::Index hidden, Eigen::Index output)
      : w1_(Matrix::Zero(hidden, input)),
        b1_(Vector::Zero(hidden)),
        w2_(Matrix::Zero(output, hidden)),
        b2_(Vector::Zero(output)) {}

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static QNetwork random(Eigen::Index input, Eigen::Index hidden, Eigen::Index output,
                         std::uint64_t seed) {
    QNetwork net(input, hidden, output);
    Rng rng(seed);
    const Scalar bound1 = Scalar(1) / std::sqrt(Scalar(input));
    const Scalar bound2 = Scalar(1) / std::sqrt(Scalar(hidden));
    auto fill = [&rng](auto& m, Scalar bound) {
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<Scalar>(uniform(rng, -bound, bound));
      }
    };
    fill(net.w1_, bound1);
    fill(net.b1_, bound1);
    fill(net.w2_, bound2);
    fill(net.b2_, bound2);
    return net;
  }

  [[nodiscard]] Eigen::Index input_dim() const { return w1_.cols(); }
  [[nodiscard]] Eigen::Index hidden_dim() const { return w1_.rows(); }
  [[nodiscard]] Eigen::Index output_dim() const { return w2_.rows(); }

  [[nodiscard]] Vector action_values(const Vector& state) const {
    check_input(state.rows());
    return w2_ * relu(w1_ * state + b1_) + b2_;
  }

  [[nodiscard]] Matrix action_values(const Matrix& states) const {
    check_input(states.rows());
    Matrix hidden = (w1_ * states).colwise() + b1_;
    return (w2_ * relu(hidden)).colwise() + b2_;
  }

  [[nodiscard]] Vector scores(const Vector& state) const { return softmax(action_values(state)); }

  /// Mean squared error (1/B) sum_b (Q(s_b, a_b) - y_b)^2 over the batch
  /// columns and its gradient with respect to every parameter.
  Scalar loss_and_gradients(const Matrix& states, std::span<const int> actions,
                            const Vector& targets, Gradients& grad) const {
    check_input(states.rows());
    const Eigen::Index batch = states.cols();
    if (static_cast<Eigen::Index>(actions.size()) != batch || targets.size() != batch) {
      throw ShapeError("batch, actions and targets disagree in length");
    }
    Matrix pre = (w1_ * states).colwise() + b1_;
    Matrix hidden = relu(pre);
    Matrix q = (w2_ * hidden).colwise() + b2_;

    Matrix dq = Matrix::Zero(q.rows(), batch);
    Scalar loss = 0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const int a = actions[static_cast<std::size_t>(b)];
      if (a < 0 || a >= q.rows()) throw ShapeError(fmt::format("action {} out of range", a));
      const Scalar err = q(a, b) - targets[b];
      loss += err * err;
      dq(a, b) = Scalar(2) * err / Scalar(batch);
    }
    loss /= Scalar(batch);

    grad.w2.noalias() = dq * hidden.transpose();
    grad.b2 = dq.rowwise().sum();
    Matrix dpre = (w2_.transpose() * dq).cwiseProduct((pre.array() > Scalar(0)).matrix().template cast<Scalar>());
    grad.w1.noalias() = dpre * states.transpose();
    grad.b1 = dpre.rowwise().sum();
    return loss;
  }

  [[nodiscard]] Eigen::Index parameter_count() const {
    return w1_.size() + b1_.size() + w2_.size() + b2_.size();
  }

  /// Flat view over w1 (column-major), b1, w2, b2.
  Scalar& parameter(Eigen::Index i) { return flat_ref(w1_, b1_, w2_, b2_, i); }
  static Scalar gradient(const Gradients& g, Eigen::Index i) {
    return flat_ref(g.w1, g.b1, g.w2, g.b2, i);
  }
  static Scalar& gradient(Gradients& g, Eigen::Index i) { return flat_ref(g.w1, g.b1, g.w2, g.b2, i); }

  [[nodiscard]] bool all_finite() const {
    return w1_.allFinite() && b1_.allFinite() && w2_.allFinite() && b2_.allFinite();
  }

  const Matrix& w1() const { return w1_; }
  const Vector& b1() const { return b1_; }
  const Matrix& w2() const { return w2_; }
  const Vector& b2() const { return b2_; }
  Matrix& w1() { return w1_; }
  Vector& b1() { return b1_; }
  Matrix& w2() { return w2_; }
  Vector& b2() { return b2_; }

  bool operator==(const QNetwork& o) const {
    return w1_ == o.w1_ && b1_ == o.b1_ && w2_ == o.w2_ && b2_ == o.b2_;
  }

 private:
  void check_input(Eigen::Index rows) const {
    if (rows != input_dim()) {
      throw ShapeError(fmt::format("state has {} values, network expects {}", rows, input_dim()));
    }
  }

  template <typename M1, typename V1, typename M2, typename V2>
  static auto& flat_ref(M1& w1, V1& b1, M2& w2, V2& b2, Eigen::Index i) {
    if (i < w1.size()) return w1.data()[i];
    i -= w1.size();
    if (i < b1.size()) return b1.data()[i];
    i -= b1.size();
    if (i < w2.size()) return w2.data()[i];
    i -= w2.size();
    if (i < b2.size()) return b2.data()[i];
    throw ShapeError("parameter index out of range");
  }

  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
};

}  // namespace hydra

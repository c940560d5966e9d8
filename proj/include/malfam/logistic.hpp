#pragma once

#include "malfam/common.hpp"

namespace malfam {

/// Row-wise softmax with the max logit subtracted first.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

template <typename Scalar>
MatrixX<Scalar> one_hot(std::span<const int> labels, Eigen::Index classes) {
  MatrixX<Scalar> y = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = Scalar(1);
  return y;
}

/// Mean softmax cross-entropy plus (l2 / 2) * ||W||^2; the bias is not
/// penalized. `labels` are dense class indices into the columns of W.
template <typename Scalar>
Scalar logistic_objective(const Eigen::Ref<const MatrixX<Scalar>>& x, std::span<const int> labels,
                          const MatrixX<Scalar>& weights, const VectorX<Scalar>& bias, Scalar l2) {
  const MatrixX<Scalar> logits = (x * weights).rowwise() + bias.transpose();
  const VectorX<Scalar> row_max = logits.rowwise().maxCoeff();
  const VectorX<Scalar> log_norm =
      ((logits.colwise() - row_max).array().exp().rowwise().sum().log().matrix() + row_max);
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) loss += log_norm(i) - logits(i, labels[static_cast<std::size_t>(i)]);
  return loss / static_cast<Scalar>(x.rows()) + l2 / 2 * weights.squaredNorm();
}

template <typename Scalar>
void logistic_gradient(const Eigen::Ref<const MatrixX<Scalar>>& x, std::span<const int> labels,
                       const MatrixX<Scalar>& weights, const VectorX<Scalar>& bias, Scalar l2,
                       MatrixX<Scalar>& grad_weights, VectorX<Scalar>& grad_bias) {
  const MatrixX<Scalar> logits = (x * weights).rowwise() + bias.transpose();
  MatrixX<Scalar> residual = softmax_rows(logits) - one_hot<Scalar>(labels, weights.cols());
  residual /= static_cast<Scalar>(x.rows());
  grad_weights = x.transpose() * residual + l2 * weights;
  grad_bias = residual.colwise().sum().transpose();
}

}  // namespace malfam

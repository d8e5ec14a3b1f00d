#pragma once

#include "bgcn/common.hpp"

namespace bgcn {

enum class NormalizationMode { symmetric, row };

// Self-loop normalization of a nonnegative adjacency. With A' = A + I and
// D' the diagonal of A' row sums:
//   symmetric: D'^{-1/2} A' D'^{-1/2}
//   row:       D'^{-1} A'
template <typename Derived>
Matrix<typename Derived::Scalar> normalize_adjacency(const Eigen::MatrixBase<Derived>& adjacency,
                                                     NormalizationMode mode = NormalizationMode::symmetric) {
  using Scalar = typename Derived::Scalar;
  if (adjacency.rows() != adjacency.cols())
    throw ShapeError("adjacency must be square, got " + shape_string(adjacency.rows(), adjacency.cols()));
  Matrix<Scalar> looped = adjacency;
  looped.diagonal().array() += Scalar(1);
  const Vector<Scalar> degree = looped.rowwise().sum();
  if (mode == NormalizationMode::row) return degree.cwiseInverse().asDiagonal() * looped;
  const Vector<Scalar> inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * looped * inv_sqrt.asDiagonal();
}

// Z(p,q) = ||e_p - e_q||^2 for the rows of `embeddings`.
template <typename Derived>
Matrix<typename Derived::Scalar> pairwise_sq_distances(const Eigen::MatrixBase<Derived>& embeddings) {
  using Scalar = typename Derived::Scalar;
  if (!embeddings.allFinite()) throw DataError("embeddings contain non-finite values");
  const Index n = embeddings.rows();
  Matrix<Scalar> z(n, n);
  for (Index p = 0; p < n; ++p) {
    z(p, p) = Scalar(0);
    for (Index q = p + 1; q < n; ++q) {
      const Scalar d = (embeddings.row(p) - embeddings.row(q)).squaredNorm();
      z(p, q) = d;
      z(q, p) = d;
    }
  }
  return z;
}

// Row-wise softmax of ReLU(E1 E2^T); the attention-style adaptive adjacency.
template <typename D1, typename D2>
Matrix<typename D1::Scalar> adaptive_adjacency(const Eigen::MatrixBase<D1>& e1, const Eigen::MatrixBase<D2>& e2) {
  using Scalar = typename D1::Scalar;
  if (e1.rows() != e2.rows() || e1.cols() != e2.cols())
    throw ShapeError("adaptive adjacency embeddings disagree: " + shape_string(e1.rows(), e1.cols()) + " vs " +
                     shape_string(e2.rows(), e2.cols()));
  Matrix<Scalar> logits = (e1 * e2.transpose()).cwiseMax(Scalar(0));
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar peak = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - peak).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

// Gradient of a loss through adaptive_adjacency. `adjacency` is the forward
// output, `grad_adjacency` the upstream gradient; writes dL/dE1 and dL/dE2.
template <typename Scalar>
void adaptive_adjacency_backward(const Matrix<Scalar>& e1, const Matrix<Scalar>& e2, const Matrix<Scalar>& adjacency,
                                 const Matrix<Scalar>& grad_adjacency, Matrix<Scalar>& grad_e1,
                                 Matrix<Scalar>& grad_e2) {
  const Matrix<Scalar> logits = e1 * e2.transpose();
  // softmax backward per row: dS = A .* (dA - rowsum(dA .* A))
  const Vector<Scalar> inner = (grad_adjacency.array() * adjacency.array()).rowwise().sum();
  Matrix<Scalar> grad_logits = adjacency.array() * (grad_adjacency.colwise() - inner).array();
  grad_logits = (logits.array() > Scalar(0)).select(grad_logits, Scalar(0));
  grad_e1 = grad_logits * e2;
  grad_e2 = grad_logits.transpose() * e1;
}

}  // namespace bgcn

#pragma once

#include <Eigen/Dense>

#include "drcnn/error.hpp"

namespace drcnn {

/// Eigenvalues at or below this are treated as exactly zero variance.
inline constexpr double kZeroVariance = 1e-12;

/// Full-rank PCA transform. Column k of `components` is the k-th principal
/// direction; `variances` are the matching eigenvalues of the training
/// covariance, sorted descending.
template <typename Scalar>
struct PcaModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix components;
  Vector variances;

  Eigen::Index dim() const { return components.rows(); }
  bool operator==(const PcaModel& o) const {
    return components == o.components && variances == o.variances;
  }
};

/// Fits PCA on a (normalized) training matrix, one sample per row. The
/// covariance divides by n. Each component is sign-fixed so its entry of
/// largest magnitude is positive.
template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Model = PcaModel<Scalar>;
  if (x.rows() < 2) throw ValidationError("pca_fit: need at least 2 samples");
  if (!x.allFinite()) throw ValidationError("pca_fit: non-finite input");

  const auto n = static_cast<Scalar>(x.rows());
  const typename Model::Matrix centered = x.rowwise() - x.colwise().mean();
  typename Model::Matrix cov = (centered.transpose() * centered) / n;

  Eigen::SelfAdjointEigenSolver<typename Model::Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw ValidationError("pca_fit: eigensolver failed");

  const Eigen::Index dim = x.cols();
  Model m;
  m.components.resize(dim, dim);
  m.variances.resize(dim);
  // The solver returns ascending eigenvalues.
  for (Eigen::Index k = 0; k < dim; ++k) {
    const Eigen::Index src = dim - 1 - k;
    auto col = solver.eigenvectors().col(src);
    Eigen::Index pivot = 0;
    col.cwiseAbs().maxCoeff(&pivot);
    const Scalar sign = col(pivot) < Scalar(0) ? Scalar(-1) : Scalar(1);
    m.components.col(k) = sign * col;
    const Scalar v = solver.eigenvalues()(src);
    m.variances(k) = v <= Scalar(kZeroVariance) ? Scalar(0) : v;
  }
  return m;
}

/// The fixed PCA layer: X * components, zero bias.
template <typename Scalar, typename Derived>
typename PcaModel<Scalar>::Matrix pca_transform(const PcaModel<Scalar>& m,
                                                const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != m.dim()) {
    throw ValidationError("pca_transform: expected " + std::to_string(m.dim()) + " columns, got " +
                          std::to_string(x.cols()));
  }
  return x * m.components;
}

}  // namespace drcnn

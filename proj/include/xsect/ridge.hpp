#pragma once

#include <Eigen/Dense>

#include "xsect/error.hpp"

namespace xsect {

struct RidgeConfig {
  double alpha = 1.0;
};

template <typename Scalar>
struct RidgeSolution {
  Scalar intercept = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coef;
};

// Ridge with an unpenalized intercept: centers X and y, then solves
// (Xc'Xc + alpha I) beta = Xc'yc. Throws when alpha == 0 and the Gram
// matrix is singular.
template <typename DerivedX, typename DerivedY>
RidgeSolution<typename DerivedX::Scalar> ridge_solve(const Eigen::MatrixBase<DerivedX>& X,
                                                     const Eigen::MatrixBase<DerivedY>& y,
                                                     typename DerivedX::Scalar alpha) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (X.rows() < 1) throw ValidationError("ridge: no samples");
  if (X.rows() != y.size()) throw ValidationError("ridge: X and y disagree on sample count");
  if (!(alpha >= Scalar(0))) throw ValidationError("ridge: alpha must be >= 0");

  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> x_mean = X.colwise().mean();
  const Scalar y_mean = y.mean();
  const Matrix xc = X.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;

  Matrix gram = Matrix::Zero(X.cols(), X.cols());
  gram.template selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
  gram = gram.template selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += alpha;
  const Vector rhs = xc.transpose() * yc;

  if (alpha == Scalar(0)) {
    Eigen::ColPivHouseholderQR<Matrix> qr(gram);
    if (qr.rank() < gram.cols())
      throw ValidationError("ridge: X'X is singular with alpha = 0; use alpha > 0");
  }
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw ValidationError("ridge: factorization failed; use alpha > 0");

  RidgeSolution<Scalar> out;
  out.coef = ldlt.solve(rhs);
  out.intercept = y_mean - x_mean.dot(out.coef);
  return out;
}

struct RidgeModel {
  double intercept = 0.0;
  Eigen::VectorXd coef;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    return (X * coef).array() + intercept;
  }
};

RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeConfig& config);

}  // namespace xsect

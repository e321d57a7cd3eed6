#include "xsect/ridge.hpp"

namespace xsect {

RidgeModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RidgeConfig& config) {
  auto sol = ridge_solve(X, y, config.alpha);
  return RidgeModel{sol.intercept, std::move(sol.coef)};
}

}  // namespace xsect

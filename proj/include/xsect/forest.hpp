#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace xsect {

struct ForestConfig {
  int n_estimators = 1000;
  int max_features = 11;
  std::optional<int> max_depth = 3;  // nullopt: grow until leaves are pure
  bool bootstrap = true;             // false only for oracle tests
};

void validate(const ForestConfig& config, int n_features);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

// CART regression tree; samples with x[feature] <= threshold go left.
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  // Edges on the longest root-to-leaf path; a single leaf has depth 0.
  int depth() const;
  std::vector<int> leaves() const;

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestModel {
  int n_features = 0;
  std::vector<RegressionTree> trees;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  // trees x rows matrix of individual tree outputs
  Eigen::MatrixXd predict_per_tree(const Eigen::MatrixXd& X) const;
};

// Tree t draws from a stream seeded by derive_seed(seed, t), so the result
// does not depend on `threads`.
ForestModel forest_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config,
                       std::uint64_t seed, int threads = 1);

}  // namespace xsect

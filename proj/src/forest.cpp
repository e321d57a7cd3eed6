#include "xsect/forest.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "xsect/error.hpp"
#include "xsect/parallel.hpp"
#include "xsect/random.hpp"

namespace xsect {
namespace {

// Each feature column replaced by codes into its sorted distinct values.
// Split search then works on exact value boundaries without re-sorting.
struct Binned {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint32_t>> codes;

  explicit Binned(const Eigen::MatrixXd& X) : values(static_cast<std::size_t>(X.cols())), codes(values.size()) {
    const auto n = static_cast<std::size_t>(X.rows());
    for (std::size_t f = 0; f < values.size(); ++f) {
      const auto col = X.col(static_cast<Eigen::Index>(f));
      auto& v = values[f];
      v.assign(col.data(), col.data() + n);
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      auto& c = codes[f];
      c.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        c[i] = static_cast<std::uint32_t>(std::lower_bound(v.begin(), v.end(), col(static_cast<Eigen::Index>(i))) - v.begin());
    }
  }
};

struct Split {
  int feature = -1;
  std::uint32_t code = 0;  // left side: codes <= code
  double threshold = 0.0;
  double score = 0.0;      // S_l^2/W_l + S_r^2/W_r
};

class TreeBuilder {
 public:
  TreeBuilder(const Binned& data, const Eigen::VectorXd& y, const ForestConfig& cfg, Rng& rng)
      : data_(data), y_(y), cfg_(cfg), rng_(rng) {}

  RegressionTree build() {
    const std::size_t n = static_cast<std::size_t>(y_.size());
    weight_.assign(n, cfg_.bootstrap ? 0u : 1u);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t k = 0; k < n; ++k) ++weight_[pick(rng_)];
    }
    for (std::size_t i = 0; i < n; ++i)
      if (weight_[i] > 0) index_.push_back(static_cast<std::uint32_t>(i));

    struct Pending {
      int node;
      std::size_t begin, end;
      int depth;
    };
    std::vector<Pending> stack{{new_node(), 0, index_.size(), 0}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      double w = 0, s = 0;
      double lo = y_(index_[p.begin]), hi = lo;
      for (std::size_t k = p.begin; k < p.end; ++k) {
        const double yi = y_(index_[k]);
        w += weight_[index_[k]];
        s += weight_[index_[k]] * yi;
        lo = std::min(lo, yi);
        hi = std::max(hi, yi);
      }
      // a weighted mean can round just outside the sample range
      nodes_[p.node].value = std::clamp(s / w, lo, hi);
      const bool depth_done = cfg_.max_depth && p.depth >= *cfg_.max_depth;
      if (depth_done || p.end - p.begin < 2 || lo == hi) continue;

      const Split split = best_split(p.begin, p.end, w, s);
      if (split.feature < 0) continue;

      const auto& codes = data_.codes[static_cast<std::size_t>(split.feature)];
      auto mid = std::stable_partition(index_.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                       index_.begin() + static_cast<std::ptrdiff_t>(p.end),
                                       [&](std::uint32_t i) { return codes[i] <= split.code; });
      const auto m = static_cast<std::size_t>(mid - index_.begin());
      const int left = new_node();
      const int right = new_node();
      auto& node = nodes_[p.node];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left;
      node.right = right;
      stack.push_back({right, m, p.end, p.depth + 1});
      stack.push_back({left, p.begin, m, p.depth + 1});
    }
    return RegressionTree(std::move(nodes_));
  }

 private:
  int new_node() {
    nodes_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  Split best_split(std::size_t begin, std::size_t end, double w_total, double s_total) {
    const int p = static_cast<int>(data_.values.size());
    features_.resize(static_cast<std::size_t>(p));
    std::iota(features_.begin(), features_.end(), 0);
    const int k = std::min(cfg_.max_features, p);
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, p - 1);
      std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(pick(rng_))]);
    }
    Split best;
    best.score = s_total * s_total / w_total;
    const double parent = best.score;
    for (int i = 0; i < k; ++i) scan_feature(features_[static_cast<std::size_t>(i)], begin, end, w_total, s_total, best);
    if (!(best.score > parent)) best.feature = -1;
    return best;
  }

  void consider(int f, std::uint32_t code_lo, std::uint32_t code_hi, double wl, double sl, double w_total,
                double s_total, Split& best) const {
    const double wr = w_total - wl, sr = s_total - sl;
    const double score = sl * sl / wl + sr * sr / wr;
    if (score > best.score) {
      const auto& v = data_.values[static_cast<std::size_t>(f)];
      double thr = 0.5 * (v[code_lo] + v[code_hi]);
      if (thr >= v[code_hi]) thr = v[code_lo];
      best = Split{f, code_lo, thr, score};
    }
  }

  void scan_feature(int f, std::size_t begin, std::size_t end, double w_total, double s_total, Split& best) {
    const auto& codes = data_.codes[static_cast<std::size_t>(f)];
    const std::size_t n_bins = data_.values[static_cast<std::size_t>(f)].size();
    const std::size_t n = end - begin;
    if (n * 4 < n_bins) {
      // few samples: sort them by code
      order_.assign(index_.begin() + static_cast<std::ptrdiff_t>(begin), index_.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
        return codes[a] < codes[b] || (codes[a] == codes[b] && a < b);
      });
      double wl = 0, sl = 0;
      for (std::size_t k = 0; k + 1 < order_.size(); ++k) {
        const auto i = order_[k];
        wl += weight_[i];
        sl += weight_[i] * y_(i);
        const auto c = codes[i], c_next = codes[order_[k + 1]];
        if (c != c_next) consider(f, c, c_next, wl, sl, w_total, s_total, best);
      }
      return;
    }
    bin_w_.assign(n_bins, 0.0);
    bin_s_.assign(n_bins, 0.0);
    for (std::size_t k = begin; k < end; ++k) {
      const auto i = index_[k];
      bin_w_[codes[i]] += weight_[i];
      bin_s_[codes[i]] += weight_[i] * y_(i);
    }
    double wl = 0, sl = 0;
    std::ptrdiff_t prev = -1;
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (bin_w_[b] == 0.0) continue;
      if (prev >= 0) consider(f, static_cast<std::uint32_t>(prev), static_cast<std::uint32_t>(b), wl, sl, w_total, s_total, best);
      wl += bin_w_[b];
      sl += bin_s_[b];
      prev = static_cast<std::ptrdiff_t>(b);
    }
  }

  const Binned& data_;
  const Eigen::VectorXd& y_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::vector<std::uint32_t> weight_;
  std::vector<std::uint32_t> index_;
  std::vector<std::uint32_t> order_;
  std::vector<int> features_;
  std::vector<double> bin_w_, bin_s_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

void validate(const ForestConfig& c, int n_features) {
  if (c.n_estimators < 1) throw ConfigError("forest: n_estimators must be >= 1");
  if (c.max_features < 1 || c.max_features > n_features)
    throw ConfigError("forest: max_features must be in 1.." + std::to_string(n_features));
  if (c.max_depth && *c.max_depth < 0) throw ConfigError("forest: max_depth must be >= 0");
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int i = 0;
  while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(i)].value;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  // children always have larger indices than their parent
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.feature < 0) continue;
    d[static_cast<std::size_t>(n.left)] = d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    deepest = std::max(deepest, d[i] + 1);
  }
  return deepest;
}

std::vector<int> RegressionTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].feature < 0) out.push_back(static_cast<int>(i));
  return out;
}

Eigen::MatrixXd ForestModel::predict_per_tree(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(trees.size()), X.rows());
  for (std::size_t t = 0; t < trees.size(); ++t)
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(static_cast<Eigen::Index>(t), r) = trees[t].predict(X.row(r));
  return out;
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& X) const {
  const auto inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.rows());
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(X.rows(), inf), hi = Eigen::VectorXd::Constant(X.rows(), -inf);
  for (const auto& tree : trees)
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const double v = tree.predict(X.row(r));
      sum(r) += v;
      lo(r) = std::min(lo(r), v);
      hi(r) = std::max(hi(r), v);
    }
  Eigen::VectorXd out = sum / static_cast<double>(trees.size());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = std::clamp(out(r), lo(r), hi(r));
  return out;
}

ForestModel forest_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config,
                       std::uint64_t seed, int threads) {
  validate(config, static_cast<int>(X.cols()));
  if (X.rows() < 2) throw ValidationError("forest: need at least 2 samples");
  if (X.rows() != y.size()) throw ValidationError("forest: X and y disagree on sample count");
  const Binned data(X);
  ForestModel model;
  model.n_features = static_cast<int>(X.cols());
  model.trees.resize(static_cast<std::size_t>(config.n_estimators));
  parallel_for(model.trees.size(), threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    model.trees[t] = TreeBuilder(data, y, config, rng).build();
  });
  return model;
}

}  // namespace xsect

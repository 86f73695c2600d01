#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "drgate/error.hpp"
#include "drgate/learners.hpp"
#include "drgate/parallel.hpp"
#include "drgate/rng.hpp"

namespace drgate::learn {

namespace {

constexpr const char* kModule = "learners";

struct Pending {
  int node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, int mtry, int min_leaf, int max_depth, Rng& rng)
      : x_(x), t_(t), mtry_(mtry), min_leaf_(min_leaf), max_depth_(max_depth), rng_(rng) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  RegressionTree build(std::vector<Eigen::Index> rows) {
    rows_ = std::move(rows);
    const std::size_t m = rows_.size();
    const auto p = static_cast<std::size_t>(x_.cols());
    // Presorting costs O(p m) per tree level against O(mtry m log m) for
    // sorting candidates at every node; use it when features are few.
    presorted_ = static_cast<double>(p) <= 2.0 * mtry_ * std::log2(std::max<std::size_t>(m, 2));
    if (presorted_) {
      order_.resize(p * m);
      goes_left_.assign(m, 0);
      buffer_.resize(m);
      for (std::size_t f = 0; f < p; ++f) {
        auto* ord = order_.data() + f * m;
        std::iota(ord, ord + m, 0u);
        std::sort(ord, ord + m, [&](std::uint32_t a, std::uint32_t b) {
          return x_(rows_[a], static_cast<Eigen::Index>(f)) < x_(rows_[b], static_cast<Eigen::Index>(f));
        });
      }
    }
    nodes_.clear();
    nodes_.push_back(make_leaf(0, m));
    std::vector<Pending> stack{{0, 0, m, 0}};
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      auto split = find_split(cur.begin, cur.end, cur.depth);
      if (!split) continue;
      const auto [feature, threshold] = *split;
      const std::size_t mid = apply_split(cur.begin, cur.end, feature, threshold);
      const int left = static_cast<int>(nodes_.size());
      nodes_.push_back(make_leaf(cur.begin, mid));
      const int right = static_cast<int>(nodes_.size());
      nodes_.push_back(make_leaf(mid, cur.end));
      auto& node = nodes_[static_cast<std::size_t>(cur.node)];
      node.feature = static_cast<int>(feature);
      node.threshold = threshold;
      node.left = left;
      node.right = right;
      stack.push_back({right, mid, cur.end, cur.depth + 1});
      stack.push_back({left, cur.begin, mid, cur.depth + 1});
    }
    return RegressionTree(std::move(nodes_));
  }

 private:
  /// Target of the k-th sample in the node range (any feature order will do).
  double target_at(std::size_t k) const {
    return presorted_ ? t_[rows_[order_[k]]] : t_[rows_[k]];
  }

  TreeNode make_leaf(std::size_t begin, std::size_t end) const {
    TreeNode leaf;
    double sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) sum += target_at(k);
    leaf.count = static_cast<int>(end - begin);
    leaf.value = leaf.count > 0 ? sum / leaf.count : 0.0;
    return leaf;
  }

  /// Moves samples with x <= threshold to the front of the range in every
  /// ordering and returns the boundary.
  std::size_t apply_split(std::size_t begin, std::size_t end, Eigen::Index feature, double threshold) {
    if (!presorted_) {
      auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                   rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                   [&](Eigen::Index r) { return x_(r, feature) <= threshold; });
      return static_cast<std::size_t>(mid_it - rows_.begin());
    }
    const std::size_t m = rows_.size();
    std::size_t n_left = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const std::uint32_t s = order_[k];
      goes_left_[s] = x_(rows_[s], feature) <= threshold;
      n_left += goes_left_[s];
    }
    for (std::size_t f = 0; f < features_.size(); ++f) {
      auto* ord = order_.data() + f * m;
      std::size_t l = begin, r = 0;
      for (std::size_t k = begin; k < end; ++k) {
        const std::uint32_t s = ord[k];
        if (goes_left_[s]) ord[l++] = s;
        else buffer_[r++] = s;
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), ord + l);
    }
    return begin + n_left;
  }

  /// Fills pairs_ with (feature value, target) for the node, sorted by value.
  void sorted_pairs(Eigen::Index f, std::size_t begin, std::size_t end) {
    pairs_.clear();
    if (presorted_) {
      const auto* ord = order_.data() + static_cast<std::size_t>(f) * rows_.size();
      for (std::size_t k = begin; k < end; ++k) {
        const auto r = rows_[ord[k]];
        pairs_.emplace_back(x_(r, f), t_[r]);
      }
      return;
    }
    for (std::size_t k = begin; k < end; ++k) pairs_.emplace_back(x_(rows_[k], f), t_[rows_[k]]);
    std::sort(pairs_.begin(), pairs_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  std::optional<std::pair<Eigen::Index, double>> find_split(std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    if (n < 2 * static_cast<std::size_t>(min_leaf_) || n < 2) return std::nullopt;
    if (max_depth_ > 0 && depth >= max_depth_) return std::nullopt;
    double total = 0.0;
    double lo = target_at(begin), hi = lo;
    for (std::size_t k = begin; k < end; ++k) {
      const double v = target_at(k);
      total += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo == hi) return std::nullopt;

    const double parent = total * total / static_cast<double>(n);
    double best = parent + 1e-10 * std::max(1.0, std::abs(parent));
    std::optional<std::pair<Eigen::Index, double>> result;

    // Partial Fisher-Yates draw of mtry candidate features.
    const std::size_t p = features_.size();
    for (std::size_t c = 0; c < static_cast<std::size_t>(mtry_); ++c) {
      std::uniform_int_distribution<std::size_t> pick(c, p - 1);
      std::swap(features_[c], features_[pick(rng_)]);
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(mtry_); ++c) {
      const Eigen::Index f = features_[c];
      sorted_pairs(f, begin, end);
      if (pairs_.front().first == pairs_.back().first) continue;
      // Left-to-right summation in value order keeps the gains independent
      // of how ties were ordered.
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left_sum += pairs_[k].second;
        const std::size_t nl = k + 1;
        if (nl < static_cast<std::size_t>(min_leaf_)) continue;
        if (n - nl < static_cast<std::size_t>(min_leaf_)) break;
        if (pairs_[k].first == pairs_[k + 1].first) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) + right_sum * right_sum / static_cast<double>(n - nl);
        if (gain > best) {
          best = gain;
          double thr = 0.5 * (pairs_[k].first + pairs_[k + 1].first);
          if (!(thr < pairs_[k + 1].first)) thr = pairs_[k].first;
          result = std::make_pair(f, thr);
        }
      }
    }
    return result;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& t_;
  int mtry_;
  int min_leaf_;
  int max_depth_;
  Rng& rng_;
  std::vector<Eigen::Index> features_;
  std::vector<Eigen::Index> rows_;
  bool presorted_ = false;
  std::vector<std::uint32_t> order_;  ///< per-feature sample orderings, feature-major
  std::vector<char> goes_left_;
  std::vector<std::uint32_t> buffer_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, double>> pairs_;
};

}  // namespace

double RegressionTree::predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
  std::size_t k = 0;
  for (;;) {
    const TreeNode& node = nodes_[k];
    if (node.feature < 0) return node.value;
    k = static_cast<std::size_t>(x(row, node.feature) <= node.threshold ? node.left : node.right);
  }
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (const auto& tree : trees_)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += tree.predict_row(x, i);
  return out / static_cast<double>(trees_.size());
}

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const ForestParams& params) {
  if (x.rows() != t.size()) throw Error(ErrorKind::Validation, kModule, "feature rows and target length disagree");
  if (params.n_trees < 1) throw Error(ErrorKind::Validation, kModule, "forest needs at least one tree");
  if (params.min_leaf < 1) throw Error(ErrorKind::Validation, kModule, "min_leaf must be at least 1");
  if (x.rows() < 2 * static_cast<Eigen::Index>(params.min_leaf))
    throw Error(ErrorKind::Validation, kModule,
                "forest needs at least 2*min_leaf = " + std::to_string(2 * params.min_leaf) + " rows");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  bool all_constant = true;
  for (Eigen::Index j = 0; j < p && all_constant; ++j)
    all_constant = (x.col(j).array() == x(0, j)).all();
  if (all_constant || p == 0) {
    const double m = t.mean();
    TreeNode leaf;
    leaf.value = m;
    leaf.count = static_cast<int>(n);
    ForestParams single = params;
    single.n_trees = 1;
    return ForestModel({RegressionTree({leaf})}, single, Eigen::VectorXd::Constant(n, m));
  }

  int mtry = params.mtry > 0 ? params.mtry : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  mtry = std::clamp(mtry, 1, static_cast<int>(p));

  const auto n_trees = static_cast<std::size_t>(params.n_trees);
  std::vector<std::optional<RegressionTree>> trees(n_trees);
  std::vector<std::vector<std::pair<Eigen::Index, double>>> oob(n_trees);
  parallel_for(n_trees, [&](std::size_t b) {
    auto rng = make_rng(params.seed, {kStreamForest, b});
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::vector<char> in_bag(static_cast<std::size_t>(n), 0);
    if (params.bootstrap) {
      std::uniform_int_distribution<Eigen::Index> draw(0, n - 1);
      for (auto& r : rows) {
        r = draw(rng);
        in_bag[static_cast<std::size_t>(r)] = 1;
      }
    } else {
      std::iota(rows.begin(), rows.end(), 0);
      std::fill(in_bag.begin(), in_bag.end(), 1);
    }
    TreeBuilder builder(x, t, mtry, params.min_leaf, params.max_depth, rng);
    trees[b].emplace(builder.build(std::move(rows)));
    for (Eigen::Index i = 0; i < n; ++i)
      if (!in_bag[static_cast<std::size_t>(i)]) oob[b].emplace_back(i, trees[b]->predict_row(x, i));
  });

  Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi oob_count = Eigen::VectorXi::Zero(n);
  for (const auto& list : oob)
    for (const auto& [i, v] : list) {
      oob_sum[i] += v;
      ++oob_count[i];
    }
  Eigen::VectorXd oob_pred(n);
  for (Eigen::Index i = 0; i < n; ++i)
    oob_pred[i] = oob_count[i] > 0 ? oob_sum[i] / oob_count[i] : std::numeric_limits<double>::quiet_NaN();

  std::vector<RegressionTree> out;
  out.reserve(n_trees);
  for (auto& tr : trees) out.push_back(std::move(*tr));
  return ForestModel(std::move(out), params, std::move(oob_pred));
}

}  // namespace drgate::learn

/*
 * Copyright 2026 The hpfens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Random forest of CART trees with Gini impurity. Probabilities are the mean
// of the per-tree leaf class frequencies.

#include <numeric>

#include "classifiers_internal.hpp"
#include "serialize.hpp"

namespace hpfens::internal {
namespace {

struct Node {
  std::int32_t feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;     // go left when value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;  // offset into Tree::leaf_probs
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<double> leaf_probs;
};

struct TreeParams {
  int max_depth;
  int min_split;
  int min_leaf;
  int max_features;
  int num_classes;
};

class TreeBuilder {
 public:
  TreeBuilder(const MatrixF& x, std::span<const int> y, const TreeParams& p, Rng& rng)
      : x_(x), y_(y), p_(p), rng_(rng), features_(x.cols()) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<std::size_t> samples) {
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t make_leaf(std::span<const std::size_t> samples) {
    Node n;
    n.leaf = static_cast<std::int32_t>(tree_.leaf_probs.size());
    std::vector<double> counts(static_cast<std::size_t>(p_.num_classes), 0.0);
    for (std::size_t s : samples) counts[static_cast<std::size_t>(y_[s])] += 1.0;
    for (double c : counts) tree_.leaf_probs.push_back(c / static_cast<double>(samples.size()));
    tree_.nodes.push_back(n);
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  std::int32_t grow(std::vector<std::size_t>& samples, int depth) {
    const std::size_t n = samples.size();
    std::vector<double> total(static_cast<std::size_t>(p_.num_classes), 0.0);
    for (std::size_t s : samples) total[static_cast<std::size_t>(y_[s])] += 1.0;
    const bool pure =
        std::count_if(total.begin(), total.end(), [](double c) { return c > 0; }) <= 1;
    if (pure || n < static_cast<std::size_t>(p_.min_split) ||
        (p_.max_depth > 0 && depth >= p_.max_depth)) {
      return make_leaf(samples);
    }

    double parent_sq = 0.0;
    for (double c : total) parent_sq += c * c;

    // Score = sum over children of (sum_k count_k^2) / n_child; maximising it
    // minimises weighted Gini impurity.
    double best_score = parent_sq / static_cast<double>(n) + 1e-12;
    int best_feature = -1;
    float best_threshold = 0.0f;

    std::vector<std::pair<float, int>> column(n);
    std::vector<double> left(total.size());
    int evaluated = 0;
    // Partial Fisher-Yates: features are drawn without replacement until
    // max_features non-constant ones have been tried.
    for (std::size_t f = 0; f < features_.size() && evaluated < p_.max_features; ++f) {
      const std::size_t pick = f + static_cast<std::size_t>(rng_.below(features_.size() - f));
      std::swap(features_[f], features_[pick]);
      const std::size_t feat = features_[f];
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = {x_(samples[i], feat), y_[samples[i]]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++evaluated;
      std::fill(left.begin(), left.end(), 0.0);
      double left_sq = 0.0, right_sq = parent_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto k = static_cast<std::size_t>(column[i].second);
        const double right_k = total[k] - left[k];
        left_sq += 2.0 * left[k] + 1.0;
        right_sq -= 2.0 * right_k - 1.0;
        left[k] += 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < static_cast<std::size_t>(p_.min_leaf) ||
            nr < static_cast<std::size_t>(p_.min_leaf)) {
          continue;
        }
        const double score = left_sq / static_cast<double>(nl) + right_sq / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(feat);
          float mid = column[i].first + (column[i + 1].first - column[i].first) * 0.5f;
          if (!(mid < column[i + 1].first)) mid = column[i].first;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return make_leaf(samples);

    std::vector<std::size_t> ls, rs;
    for (std::size_t s : samples) {
      (x_(s, static_cast<std::size_t>(best_feature)) <= best_threshold ? ls : rs).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const auto self = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(Node{best_feature, best_threshold, -1, -1, -1});
    const std::int32_t l = grow(ls, depth + 1);
    const std::int32_t r = grow(rs, depth + 1);
    tree_.nodes[static_cast<std::size_t>(self)].left = l;
    tree_.nodes[static_cast<std::size_t>(self)].right = r;
    return self;
  }

  const MatrixF& x_;
  std::span<const int> y_;
  TreeParams p_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  Tree tree_;
};

class RandomForest final : public Classifier {
 public:
  void fit(const MatrixF& x, std::span<const int> y, int num_classes,
           const ClassifierSpec& spec) override {
    num_classes_ = num_classes;
    const int n_trees = param_int(spec, "n_estimators");
    TreeParams p;
    p.max_depth = param_int(spec, "max_depth");
    p.min_split = param_int(spec, "min_samples_split");
    p.min_leaf = param_int(spec, "min_samples_leaf");
    p.max_features = param_int(spec, "max_features");
    if (p.max_features == 0) {
      p.max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.cols()))));
    }
    p.max_features = std::min<int>(p.max_features, static_cast<int>(x.cols()));
    p.num_classes = num_classes;
    const bool bootstrap = param_int(spec, "bootstrap") != 0;

    trees_.clear();
    for (int t = 0; t < n_trees; ++t) {
      Rng rng(derive_seed(spec.seed, "rf-tree-" + std::to_string(t)));
      std::vector<std::size_t> samples(x.rows());
      if (bootstrap) {
        for (auto& s : samples) s = static_cast<std::size_t>(rng.below(x.rows()));
        std::sort(samples.begin(), samples.end());
      } else {
        std::iota(samples.begin(), samples.end(), 0);
      }
      TreeBuilder b(x, y, p, rng);
      trees_.push_back(b.build(std::move(samples)));
    }
  }

  MatrixD predict_proba(const MatrixF& x) const override {
    const auto k = static_cast<std::size_t>(num_classes_);
    MatrixD out(x.rows(), k, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto row = out.row(i);
      for (const Tree& t : trees_) {
        std::size_t node = 0;
        while (t.nodes[node].feature >= 0) {
          const Node& nd = t.nodes[node];
          node = static_cast<std::size_t>(
              x(i, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left : nd.right);
        }
        const double* probs = t.leaf_probs.data() + t.nodes[node].leaf;
        for (std::size_t c = 0; c < k; ++c) row[c] += probs[c];
      }
      for (double& v : row) v /= static_cast<double>(trees_.size());
    }
    return out;
  }

  void save(BinaryWriter& w) const override {
    w.put<std::int32_t>(num_classes_);
    w.put<std::uint64_t>(trees_.size());
    for (const Tree& t : trees_) {
      w.put_vector(t.nodes);
      w.put_vector(t.leaf_probs);
    }
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get<std::int32_t>();
    const auto n = r.get<std::uint64_t>();
    trees_.clear();
    for (std::uint64_t i = 0; i < n; ++i) {
      Tree t;
      t.nodes = r.get_vector<Node>();
      t.leaf_probs = r.get_vector<double>();
      validate(t);
      trees_.push_back(std::move(t));
    }
    if (trees_.empty()) fail(ErrorCode::kBundleError, "forest has no trees");
  }

 private:
  void validate(const Tree& t) const {
    const auto nn = static_cast<std::int32_t>(t.nodes.size());
    if (nn == 0) fail(ErrorCode::kBundleError, "empty tree");
    for (const Node& n : t.nodes) {
      if (n.feature >= 0) {
        if (n.left <= 0 || n.left >= nn || n.right <= 0 || n.right >= nn) {
          fail(ErrorCode::kBundleError, "corrupt tree links");
        }
      } else if (n.leaf < 0 ||
                 static_cast<std::size_t>(n.leaf) + static_cast<std::size_t>(num_classes_) >
                     t.leaf_probs.size()) {
        fail(ErrorCode::kBundleError, "corrupt leaf offset");
      }
    }
  }

  int num_classes_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<Classifier> make_random_forest() { return std::make_unique<RandomForest>(); }

}  // namespace hpfens::internal

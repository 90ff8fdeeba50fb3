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

// Histogram gradient boosting shared by the "XGB" (depth-wise) and "LGB"
// (leaf-wise) classifiers. Binary problems boost one logistic margin; K > 2
// classes boost K softmax margins with one tree per class per round.
//
// Split gain is 0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma and a
// leaf outputs -G/(H+l) scaled by the learning rate.

#include <cstdint>
#include <limits>
#include <numeric>

#include "classifiers_internal.hpp"
#include "parallel.hpp"
#include "serialize.hpp"

namespace hpfens::internal {
namespace {

constexpr double kMinGain = 1e-10;

struct Node {
  std::int32_t feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;     // go left when value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
};

using Tree = std::vector<Node>;

struct BoostParams {
  GrowthPolicy policy;
  int rounds;
  double learning_rate;
  int max_depth;  // 0 = unlimited
  int max_leaves;  // 0 = unlimited
  double lambda;
  double gamma;
  double min_hessian;
  int min_samples;
  int max_bin;
  double subsample;
  double colsample;
  bool boost_from_average;
  double multiclass_hessian_scale;  // 0 = K/(K-1)
};

// Per-feature bin edges; value v falls in the first bin b with v <= edges[b],
// or in the last bin when it exceeds every edge.
struct Binning {
  std::vector<std::vector<float>> edges;
  std::vector<std::uint8_t> bins;  // feature-major: bins[f * n + i]
  std::size_t n = 0;

  std::size_t num_bins(std::size_t f) const { return edges[f].size() + 1; }
};

Binning make_binning(const MatrixF& x, int max_bin) {
  Binning b;
  b.n = x.rows();
  const std::size_t d = x.cols();
  b.edges.resize(d);
  b.bins.resize(d * b.n);
  parallel_for(d, [&](std::size_t f) {
    std::vector<float> col(b.n);
    for (std::size_t i = 0; i < b.n; ++i) col[i] = x(i, f);
    std::vector<float> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    std::vector<float> uniq = sorted;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<float>& e = b.edges[f];
    if (uniq.size() <= static_cast<std::size_t>(max_bin)) {
      for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        float mid = uniq[i] + (uniq[i + 1] - uniq[i]) * 0.5f;
        if (!(mid < uniq[i + 1])) mid = uniq[i];
        e.push_back(mid);
      }
    } else {
      for (int q = 1; q < max_bin; ++q) {
        const float v = sorted[static_cast<std::size_t>(q) * b.n / static_cast<std::size_t>(max_bin)];
        if (v < uniq.back() && (e.empty() || v > e.back())) e.push_back(v);
      }
    }
    for (std::size_t i = 0; i < b.n; ++i) {
      b.bins[f * b.n + i] = static_cast<std::uint8_t>(
          std::lower_bound(e.begin(), e.end(), col[i]) - e.begin());
    }
  });
  return b;
}

struct BinStat {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t c = 0;
};

struct Split {
  double gain = -std::numeric_limits<double>::infinity();
  std::int32_t feature = -1;
  std::uint32_t bin = 0;
};

struct OpenLeaf {
  std::vector<std::uint32_t> rows;
  std::vector<BinStat> hist;
  double g = 0.0, h = 0.0;
  int depth = 0;
  std::int32_t node = 0;
  Split best;
};

class TreeGrower {
 public:
  TreeGrower(const Binning& bins, const BoostParams& p, std::span<const double> grad,
             std::span<const double> hess, std::vector<std::uint32_t> features)
      : bins_(bins), p_(p), grad_(grad), hess_(hess), features_(std::move(features)) {
    offsets_.resize(features_.size() + 1, 0);
    for (std::size_t j = 0; j < features_.size(); ++j) {
      offsets_[j + 1] = offsets_[j] + bins_.num_bins(features_[j]);
    }
  }

  Tree grow(std::vector<std::uint32_t> rows) {
    tree_.clear();
    tree_.push_back(Node{});
    OpenLeaf root;
    root.rows = std::move(rows);
    root.hist = build_hist(root.rows);
    finish_leaf(root);

    if (p_.policy == GrowthPolicy::kDepthWise) {
      std::vector<OpenLeaf> level;
      level.push_back(std::move(root));
      while (!level.empty()) {
        std::vector<OpenLeaf> next;
        for (OpenLeaf& leaf : level) {
          if (leaf.best.gain <= kMinGain) continue;
          auto [l, r] = split(leaf);
          next.push_back(std::move(l));
          next.push_back(std::move(r));
        }
        level = std::move(next);
      }
    } else {
      std::vector<OpenLeaf> open;
      open.push_back(std::move(root));
      std::size_t leaves = 1;
      while (p_.max_leaves == 0 || leaves < static_cast<std::size_t>(p_.max_leaves)) {
        std::size_t pick = open.size();
        for (std::size_t i = 0; i < open.size(); ++i) {
          if (open[i].best.gain > kMinGain &&
              (pick == open.size() || open[i].best.gain > open[pick].best.gain)) {
            pick = i;
          }
        }
        if (pick == open.size()) break;
        OpenLeaf leaf = std::move(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        auto [l, r] = split(leaf);
        open.push_back(std::move(l));
        open.push_back(std::move(r));
        ++leaves;
      }
    }
    return std::move(tree_);
  }

 private:
  std::vector<BinStat> build_hist(std::span<const std::uint32_t> rows) const {
    std::vector<BinStat> hist(offsets_.back());
    parallel_for(features_.size(), [&](std::size_t j) {
      const std::uint8_t* col = bins_.bins.data() + features_[j] * bins_.n;
      BinStat* out = hist.data() + offsets_[j];
      for (std::uint32_t r : rows) {
        BinStat& s = out[col[r]];
        s.g += grad_[r];
        s.h += hess_[r];
        ++s.c;
      }
    });
    return hist;
  }

  double score(double g, double h) const { return g * g / (h + p_.lambda); }

  bool child_ok(double h, std::uint32_t c) const {
    return c >= static_cast<std::uint32_t>(p_.min_samples) && c > 0 && h >= p_.min_hessian;
  }

  // Sets the leaf value and finds its best split.
  void finish_leaf(OpenLeaf& leaf) {
    leaf.g = 0.0;
    leaf.h = 0.0;
    for (std::uint32_t r : leaf.rows) {
      leaf.g += grad_[r];
      leaf.h += hess_[r];
    }
    tree_[static_cast<std::size_t>(leaf.node)].value =
        -leaf.g / (leaf.h + p_.lambda) * p_.learning_rate;
    leaf.best = Split{};
    if (p_.max_depth > 0 && leaf.depth >= p_.max_depth) return;
    const double parent = score(leaf.g, leaf.h);
    for (std::size_t j = 0; j < features_.size(); ++j) {
      const BinStat* hist = leaf.hist.data() + offsets_[j];
      const std::size_t nb = offsets_[j + 1] - offsets_[j];
      double gl = 0.0, hl = 0.0;
      std::uint32_t cl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hist[b].g;
        hl += hist[b].h;
        cl += hist[b].c;
        if (hist[b].c == 0) continue;
        const std::uint32_t cr = static_cast<std::uint32_t>(leaf.rows.size()) - cl;
        const double hr = leaf.h - hl;
        if (!child_ok(hl, cl) || !child_ok(hr, cr)) continue;
        const double gain =
            0.5 * (score(gl, hl) + score(leaf.g - gl, hr) - parent) - p_.gamma;
        if (gain > leaf.best.gain) {
          leaf.best = Split{gain, static_cast<std::int32_t>(j), static_cast<std::uint32_t>(b)};
        }
      }
    }
  }

  std::pair<OpenLeaf, OpenLeaf> split(OpenLeaf& leaf) {
    const std::uint32_t feat = features_[static_cast<std::size_t>(leaf.best.feature)];
    const std::uint8_t* col = bins_.bins.data() + feat * bins_.n;
    OpenLeaf l, r;
    for (std::uint32_t row : leaf.rows) {
      (col[row] <= leaf.best.bin ? l.rows : r.rows).push_back(row);
    }
    l.depth = r.depth = leaf.depth + 1;
    l.node = static_cast<std::int32_t>(tree_.size());
    r.node = l.node + 1;
    tree_.push_back(Node{});
    tree_.push_back(Node{});
    Node& n = tree_[static_cast<std::size_t>(leaf.node)];
    n.feature = static_cast<std::int32_t>(feat);
    n.threshold = bins_.edges[feat][leaf.best.bin];
    n.left = l.node;
    n.right = r.node;

    // Build the smaller child's histogram and derive the sibling by subtraction.
    OpenLeaf& small = l.rows.size() <= r.rows.size() ? l : r;
    OpenLeaf& large = l.rows.size() <= r.rows.size() ? r : l;
    small.hist = build_hist(small.rows);
    large.hist = std::move(leaf.hist);
    for (std::size_t i = 0; i < large.hist.size(); ++i) {
      large.hist[i].g -= small.hist[i].g;
      large.hist[i].h -= small.hist[i].h;
      large.hist[i].c -= small.hist[i].c;
    }
    leaf.rows.clear();
    leaf.rows.shrink_to_fit();
    finish_leaf(l);
    finish_leaf(r);
    return {std::move(l), std::move(r)};
  }

  const Binning& bins_;
  const BoostParams& p_;
  std::span<const double> grad_, hess_;
  std::vector<std::uint32_t> features_;
  std::vector<std::size_t> offsets_;
  Tree tree_;
};

double tree_value(const Tree& t, std::span<const float> x) {
  std::size_t node = 0;
  while (t[node].feature >= 0) {
    const Node& n = t[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold
                                        ? n.left
                                        : n.right);
  }
  return t[node].value;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

class Gbdt final : public Classifier {
 public:
  explicit Gbdt(GrowthPolicy policy) : policy_(policy) {}

  void fit(const MatrixF& x, std::span<const int> y, int num_classes,
           const ClassifierSpec& spec) override {
    const BoostParams p = params(spec);
    num_classes_ = num_classes;
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t outputs = num_classes == 2 ? 1 : static_cast<std::size_t>(num_classes);

    init_.assign(outputs, 0.0);
    if (outputs == 1 && p.boost_from_average) {
      const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
      const double mean = std::clamp(pos / static_cast<double>(n), 1e-15, 1.0 - 1e-15);
      init_[0] = std::log(mean / (1.0 - mean));
    }

    const Binning bins = make_binning(x, p.max_bin);
    std::vector<double> margin(n * outputs);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(init_.begin(), init_.end(), margin.begin() + static_cast<std::ptrdiff_t>(i * outputs));
    }
    std::vector<double> prob(n * outputs);
    std::vector<double> grad(n), hess(n);
    const double k = static_cast<double>(num_classes);
    const double hscale =
        p.multiclass_hessian_scale > 0 ? p.multiclass_hessian_scale : k / (k - 1.0);

    trees_.clear();
    for (int round = 0; round < p.rounds; ++round) {
      Rng rng(derive_seed(spec.seed, "gbdt-round-" + std::to_string(round)));
      std::vector<std::uint32_t> rows;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (p.subsample >= 1.0 || rng.uniform() < p.subsample) rows.push_back(i);
      }
      if (rows.empty()) rows.push_back(static_cast<std::uint32_t>(rng.below(n)));
      std::vector<std::uint32_t> feats(d);
      std::iota(feats.begin(), feats.end(), 0u);
      if (p.colsample < 1.0) {
        rng.shuffle(feats);
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(p.colsample * static_cast<double>(d))));
        feats.resize(std::min(keep, d));
        std::sort(feats.begin(), feats.end());
      }

      for (std::size_t i = 0; i < n; ++i) {
        std::span<double> z(prob.data() + i * outputs, outputs);
        std::copy_n(margin.data() + i * outputs, outputs, z.begin());
        if (outputs == 1) {
          z[0] = sigmoid(z[0]);
        } else {
          softmax(z);
        }
      }
      for (std::size_t c = 0; c < outputs; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          const double pi = prob[i * outputs + c];
          const int target = outputs == 1 ? 1 : static_cast<int>(c);
          grad[i] = pi - (y[i] == target ? 1.0 : 0.0);
          const double h = pi * (1.0 - pi) * (outputs == 1 ? 1.0 : hscale);
          hess[i] = std::max(h, 1e-16);
        }
        TreeGrower grower(bins, p, grad, hess, feats);
        Tree t = grower.grow(rows);
        for (std::size_t i = 0; i < n; ++i) margin[i * outputs + c] += tree_value(t, x.row(i));
        trees_.push_back(std::move(t));
      }
    }
  }

  MatrixD predict_proba(const MatrixF& x) const override {
    const std::size_t outputs = init_.size();
    MatrixD out(x.rows(), static_cast<std::size_t>(num_classes_));
    std::vector<double> z(outputs);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::copy(init_.begin(), init_.end(), z.begin());
      for (std::size_t t = 0; t < trees_.size(); ++t) z[t % outputs] += tree_value(trees_[t], x.row(i));
      auto row = out.row(i);
      if (outputs == 1) {
        const double p1 = sigmoid(z[0]);
        row[0] = 1.0 - p1;
        row[1] = p1;
      } else {
        std::copy(z.begin(), z.end(), row.begin());
        softmax(row);
      }
    }
    return out;
  }

  void save(BinaryWriter& w) const override {
    w.put<std::int32_t>(num_classes_);
    w.put_vector(init_);
    w.put<std::uint64_t>(trees_.size());
    for (const Tree& t : trees_) w.put_vector(t);
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get<std::int32_t>();
    init_ = r.get_vector<double>();
    const std::size_t outputs = num_classes_ == 2 ? 1 : static_cast<std::size_t>(num_classes_);
    if (num_classes_ < 2 || init_.size() != outputs) {
      fail(ErrorCode::kBundleError, "corrupt boosting state");
    }
    const auto count = r.get<std::uint64_t>();
    if (count % outputs != 0) fail(ErrorCode::kBundleError, "corrupt boosting state");
    trees_.clear();
    for (std::uint64_t i = 0; i < count; ++i) {
      Tree t = r.get_vector<Node>();
      const auto nn = static_cast<std::int32_t>(t.size());
      if (nn == 0) fail(ErrorCode::kBundleError, "empty boosted tree");
      for (const Node& n : t) {
        if (n.feature >= 0 && (n.left <= 0 || n.left >= nn || n.right <= 0 || n.right >= nn)) {
          fail(ErrorCode::kBundleError, "corrupt boosted tree links");
        }
      }
      trees_.push_back(std::move(t));
    }
  }

 private:
  BoostParams params(const ClassifierSpec& spec) const {
    BoostParams p{};
    p.policy = policy_;
    p.rounds = param_int(spec, "n_estimators");
    p.learning_rate = spec.param("learning_rate");
    p.max_depth = param_int(spec, "max_depth");
    p.lambda = spec.param("reg_lambda");
    p.max_bin = param_int(spec, "max_bin");
    p.subsample = spec.param("subsample");
    p.colsample = spec.param("colsample_bytree");
    if (policy_ == GrowthPolicy::kDepthWise) {
      p.max_leaves = 0;
      p.gamma = spec.param("gamma");
      p.min_hessian = spec.param("min_child_weight");
      p.min_samples = 1;
      p.boost_from_average = false;
      p.multiclass_hessian_scale = 2.0;
    } else {
      p.max_leaves = param_int(spec, "num_leaves");
      p.gamma = 0.0;
      p.min_hessian = spec.param("min_sum_hessian");
      p.min_samples = param_int(spec, "min_child_samples");
      p.boost_from_average = true;
      p.multiclass_hessian_scale = 0.0;
    }
    return p;
  }

  GrowthPolicy policy_;
  int num_classes_ = 0;
  std::vector<double> init_;
  std::vector<Tree> trees_;  // round-major, one tree per output per round
};

}  // namespace

std::unique_ptr<Classifier> make_gbdt(GrowthPolicy policy) {
  return std::make_unique<Gbdt>(policy);
}

}  // namespace hpfens::internal

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

// One-hidden-layer ReLU network with a softmax output, trained with Adam on
// shuffled minibatches. Training stops after max_iter epochs or once the
// epoch loss fails to improve by tol for n_iter_no_change epochs in a row.

#include <numeric>

#include <Eigen/Dense>

#include "classifiers_internal.hpp"
#include "serialize.hpp"

namespace hpfens::internal {
namespace {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Adam {
  Eigen::ArrayXf m, v;
  void init(Eigen::Index n) {
    m = Eigen::ArrayXf::Zero(n);
    v = Eigen::ArrayXf::Zero(n);
  }
  void step(float* param, const float* grad, Eigen::Index n, float lr, int t) {
    constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    Eigen::Map<Eigen::ArrayXf> p(param, n);
    Eigen::Map<const Eigen::ArrayXf> g(grad, n);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.square();
    const float lr_t = lr * std::sqrt(1 - std::pow(b2, static_cast<float>(t))) /
                       (1 - std::pow(b1, static_cast<float>(t)));
    p -= lr_t * m / (v.sqrt() + eps);
  }
};

class Mlp final : public Classifier {
 public:
  void fit(const MatrixF& x, std::span<const int> y, int num_classes,
           const ClassifierSpec& spec) override {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto d = static_cast<Eigen::Index>(x.cols());
    const Eigen::Index h = param_int(spec, "hidden_units");
    const Eigen::Index k = num_classes;
    const double alpha = spec.param("alpha");
    const auto lr = static_cast<float>(spec.param("learning_rate"));
    const auto batch = std::min<Eigen::Index>(param_int(spec, "batch_size"), n);
    const int epochs = param_int(spec, "max_iter");
    const double tol = spec.param("tol");
    const int patience = param_int(spec, "n_iter_no_change");

    Rng rng(derive_seed(spec.seed, "mlp-init"));
    auto glorot = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                      Eigen::Index fan_out) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Eigen::MatrixXf m(rows, cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
          m(i, j) = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
        }
      }
      return m;
    };
    w1_ = glorot(d, h, d, h);
    b1_ = glorot(h, 1, d, h).col(0);
    w2_ = glorot(h, k, h, k);
    b2_ = glorot(k, 1, h, k).col(0);

    Adam a_w1, a_b1, a_w2, a_b2;
    a_w1.init(w1_.size());
    a_b1.init(b1_.size());
    a_w2.init(w2_.size());
    a_b2.init(b2_.size());

    Eigen::Map<const RowMatrixF> xm(x.data().data(), n, d);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(spec.seed, "mlp-shuffle"));

    double best_loss = std::numeric_limits<double>::infinity();
    int stall = 0;
    int t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      double epoch_loss = 0.0;
      for (Eigen::Index start = 0; start < n; start += batch) {
        const Eigen::Index bn = std::min(batch, n - start);
        Eigen::MatrixXf xb(bn, d);
        for (Eigen::Index i = 0; i < bn; ++i) {
          xb.row(i) = xm.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + i)]));
        }
        Eigen::MatrixXf hid = ((xb * w1_).rowwise() + b1_.transpose()).cwiseMax(0.0f);
        Eigen::MatrixXf out = (hid * w2_).rowwise() + b2_.transpose();
        double loss = 0.0;
        for (Eigen::Index i = 0; i < bn; ++i) {
          const float mx = out.row(i).maxCoeff();
          out.row(i) = (out.row(i).array() - mx).exp();
          const float s = out.row(i).sum();
          out.row(i) /= s;
          const int yi = y[order[static_cast<std::size_t>(start + i)]];
          loss -= std::log(std::max(static_cast<double>(out(i, yi)), 1e-10));
          out(i, yi) -= 1.0f;
        }
        const double reg = 0.5 * alpha * (w1_.squaredNorm() + w2_.squaredNorm());
        loss = (loss + reg) / static_cast<double>(bn);
        epoch_loss += loss * static_cast<double>(bn);

        const float inv_b = 1.0f / static_cast<float>(bn);
        const auto a = static_cast<float>(alpha);
        out *= inv_b;
        Eigen::MatrixXf g_w2 = hid.transpose() * out + (a * inv_b) * w2_;
        Eigen::VectorXf g_b2 = out.colwise().sum().transpose();
        Eigen::MatrixXf dh = (out * w2_.transpose()).cwiseProduct(
            (hid.array() > 0.0f).cast<float>().matrix());
        Eigen::MatrixXf g_w1 = xb.transpose() * dh + (a * inv_b) * w1_;
        Eigen::VectorXf g_b1 = dh.colwise().sum().transpose();

        ++t;
        a_w1.step(w1_.data(), g_w1.data(), w1_.size(), lr, t);
        a_b1.step(b1_.data(), g_b1.data(), b1_.size(), lr, t);
        a_w2.step(w2_.data(), g_w2.data(), w2_.size(), lr, t);
        a_b2.step(b2_.data(), g_b2.data(), b2_.size(), lr, t);
      }
      epoch_loss /= static_cast<double>(n);
      if (!std::isfinite(epoch_loss)) fail(ErrorCode::kNumericError, "MLP loss diverged");
      if (epoch_loss > best_loss - tol) {
        if (++stall >= patience) break;
      } else {
        stall = 0;
      }
      best_loss = std::min(best_loss, epoch_loss);
    }
  }

  MatrixD predict_proba(const MatrixF& x) const override {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const Eigen::Index k = b2_.size();
    MatrixD res(x.rows(), static_cast<std::size_t>(k));
    if (n == 0) return res;
    Eigen::Map<const RowMatrixF> xm(x.data().data(), n, static_cast<Eigen::Index>(x.cols()));
    const Eigen::MatrixXf hid = ((xm * w1_).rowwise() + b1_.transpose()).cwiseMax(0.0f);
    const Eigen::MatrixXf out = (hid * w2_).rowwise() + b2_.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      auto row = res.row(static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = out(i, j);
      softmax(row);
    }
    return res;
  }

  void save(BinaryWriter& w) const override {
    put(w, w1_);
    put(w, b1_);
    put(w, w2_);
    put(w, b2_);
  }

  void load(BinaryReader& r) override {
    w1_ = get(r);
    b1_ = get(r).col(0);
    w2_ = get(r);
    b2_ = get(r).col(0);
    if (b1_.size() != w1_.cols() || w2_.rows() != w1_.cols() || b2_.size() != w2_.cols() ||
        b2_.size() < 2) {
      fail(ErrorCode::kBundleError, "corrupt MLP state");
    }
  }

 private:
  static void put(BinaryWriter& w, const Eigen::MatrixXf& m) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    w.put_vector(std::vector<float>(m.data(), m.data() + m.size()));
  }

  static Eigen::MatrixXf get(BinaryReader& r) {
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    const auto v = r.get_vector<float>();
    if (v.size() != rows * cols) fail(ErrorCode::kBundleError, "corrupt MLP state");
    return Eigen::Map<const Eigen::MatrixXf>(v.data(), static_cast<Eigen::Index>(rows),
                                             static_cast<Eigen::Index>(cols));
  }

  Eigen::MatrixXf w1_, w2_;
  Eigen::VectorXf b1_, b2_;
};

}  // namespace

std::unique_ptr<Classifier> make_mlp() { return std::make_unique<Mlp>(); }

}  // namespace hpfens::internal

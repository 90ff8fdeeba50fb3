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

// Multinomial logistic regression with an L2 penalty on the weights (the
// intercepts are not penalised), fitted by L-BFGS. The objective is the mean
// negative log-likelihood plus ||W||^2 / (2 C n).

#include <Eigen/Dense>

#include "classifiers_internal.hpp"
#include "lbfgs.hpp"
#include "serialize.hpp"

namespace hpfens::internal {
namespace {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class LogisticRegression final : public Classifier {
 public:
  void fit(const MatrixF& x, std::span<const int> y, int num_classes,
           const ClassifierSpec& spec) override {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto d = static_cast<Eigen::Index>(x.cols());
    const Eigen::Index k = num_classes;
    const double c = spec.param("C");
    Eigen::Map<const RowMatrixF> xm(x.data().data(), n, d);

    auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
      const Eigen::MatrixXf w =
          Eigen::Map<const Eigen::MatrixXd>(theta.data(), d, k).cast<float>();
      const Eigen::VectorXd b = theta.tail(k);
      Eigen::MatrixXd scores = (xm * w).cast<double>();
      double loss = 0.0;
      Eigen::MatrixXf resid(n, k);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd z = scores.row(i).transpose() + b;
        const double mx = z.maxCoeff();
        const double lse = mx + std::log((z.array() - mx).exp().sum());
        loss += lse - z(y[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < k; ++j) {
          const double p = std::exp(z(j) - lse);
          resid(i, j) = static_cast<float>(p - (j == y[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
        }
      }
      const double inv_n = 1.0 / static_cast<double>(n);
      const Eigen::Map<const Eigen::VectorXd> wv(theta.data(), d * k);
      loss = loss * inv_n + wv.squaredNorm() * inv_n / (2.0 * c);
      Eigen::MatrixXd gw = (xm.transpose() * resid).cast<double>() * inv_n;
      gw += Eigen::Map<const Eigen::MatrixXd>(theta.data(), d, k) * (inv_n / c);
      grad.resize(theta.size());
      Eigen::Map<Eigen::MatrixXd>(grad.data(), d, k) = gw;
      grad.tail(k) = resid.cast<double>().colwise().sum().transpose() * inv_n;
      return loss;
    };

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d * k + k);
    minimize_lbfgs(objective, theta, param_int(spec, "max_iter"), spec.param("tol"));
    weights_ = Eigen::Map<const Eigen::MatrixXd>(theta.data(), d, k).cast<float>();
    bias_ = theta.tail(k);
  }

  MatrixD predict_proba(const MatrixF& x) const override {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const Eigen::Index k = bias_.size();
    MatrixD out(x.rows(), static_cast<std::size_t>(k));
    if (n == 0) return out;
    Eigen::Map<const RowMatrixF> xm(x.data().data(), n, static_cast<Eigen::Index>(x.cols()));
    const Eigen::MatrixXd scores = (xm * weights_).cast<double>();
    for (Eigen::Index i = 0; i < n; ++i) {
      auto row = out.row(static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j < k; ++j) {
        row[static_cast<std::size_t>(j)] = scores(i, j) + bias_(j);
      }
      softmax(row);
    }
    return out;
  }

  void save(BinaryWriter& w) const override {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(weights_.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(weights_.cols()));
    w.put_vector(std::vector<float>(weights_.data(), weights_.data() + weights_.size()));
    w.put_vector(std::vector<double>(bias_.data(), bias_.data() + bias_.size()));
  }

  void load(BinaryReader& r) override {
    const auto d = r.get<std::uint64_t>();
    const auto k = r.get<std::uint64_t>();
    const auto w = r.get_vector<float>();
    const auto b = r.get_vector<double>();
    if (w.size() != d * k || b.size() != k || k < 2) {
      fail(ErrorCode::kBundleError, "corrupt logistic regression state");
    }
    weights_ = Eigen::Map<const Eigen::MatrixXf>(w.data(), static_cast<Eigen::Index>(d),
                                                 static_cast<Eigen::Index>(k));
    bias_ = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(k));
  }

 private:
  Eigen::MatrixXf weights_;  // d x k
  Eigen::VectorXd bias_;
};

}  // namespace

std::unique_ptr<Classifier> make_logistic_regression() {
  return std::make_unique<LogisticRegression>();
}

}  // namespace hpfens::internal

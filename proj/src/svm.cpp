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

// C-SVC with an RBF kernel, one-vs-one for more than two classes.
//
// Each pairwise problem is solved by SMO with second-order working-set
// selection. Pairwise decision values are mapped to probabilities with a
// Platt sigmoid fitted on the training decision values, then combined by
// pairwise coupling (Wu, Lin & Weng 2004, method 2).

#include <numeric>

#include <Eigen/Dense>

#include "classifiers_internal.hpp"
#include "serialize.hpp"

namespace hpfens::internal {
namespace {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PairModel {
  std::int32_t class_a = 0;  // decision > 0 favours class_a
  std::int32_t class_b = 0;
  std::vector<std::uint32_t> sv;  // indices into Svm::support_
  std::vector<double> coef;       // alpha_i * y_i
  double rho = 0.0;
  double sigmoid_a = 0.0;  // P(class_a) = 1 / (1 + exp(A f + B))
  double sigmoid_b = 0.0;
};

// Dual SMO on one binary problem. q(i, j) = y_i y_j K(i, j).
struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;
};

SmoResult solve_smo(const std::vector<std::size_t>& idx, const std::vector<int>& ys,
                    const MatrixF& gram, double c, double eps, long long max_iter) {
  const std::size_t n = idx.size();
  auto k = [&](std::size_t i, std::size_t j) {
    return static_cast<double>(gram(idx[i], idx[j]));
  };
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  constexpr double kTau = 1e-12;
  auto is_up = [&](std::size_t t) {
    return (ys[t] == 1 && alpha[t] < c) || (ys[t] == -1 && alpha[t] > 0.0);
  };
  auto is_low = [&](std::size_t t) {
    return (ys[t] == 1 && alpha[t] > 0.0) || (ys[t] == -1 && alpha[t] < c);
  };
  for (long long iter = 0; iter < max_iter; ++iter) {
    double gmax = -HUGE_VAL;
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!is_up(t)) continue;
      const double v = -ys[t] * grad[t];
      if (v > gmax) {
        gmax = v;
        i = t;
      }
    }
    if (i == n) break;
    double gmin = HUGE_VAL, best_obj = HUGE_VAL;
    std::size_t j = n;
    const double kii = k(i, i);
    for (std::size_t t = 0; t < n; ++t) {
      if (!is_low(t)) continue;
      const double v = -ys[t] * grad[t];
      gmin = std::min(gmin, v);
      const double b = gmax - v;
      if (b > 0.0) {
        double a = kii + k(t, t) - 2.0 * k(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (j == n || gmax - gmin < eps) break;

    const double qii = kii, qjj = k(j, j);
    const double qij = ys[i] * ys[j] * k(i, j);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (ys[i] != ys[j]) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
      } else {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
      }
      if (sum > c) {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += ys[t] * (ys[i] * k(t, i) * dai + ys[j] * k(t, j) * daj);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = HUGE_VAL, lb = -HUGE_VAL, sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = ys[t] * grad[t];
    if (alpha[t] >= c) {
      if (ys[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (ys[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  SmoResult r;
  r.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  r.alpha = std::move(alpha);
  return r;
}

// Platt scaling with the Newton method of Lin, Lin & Weng (2007). Labels are
// +1 for the positive class.
std::pair<double, double> fit_sigmoid(const std::vector<double>& dec,
                                      const std::vector<int>& ys) {
  double prior1 = 0.0, prior0 = 0.0;
  for (int y : ys) (y > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = dec.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = ys[i] > 0 ? hi : lo;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  constexpr double kSigma = 1e-12, kEps = 1e-5, kMinStep = 1e-10;
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fa = dec[i] * aa + bb;
      f += fa >= 0 ? t[i] * fa + std::log1p(std::exp(-fa))
                   : (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
    }
    return f;
  };
  double fval = objective(a, b);
  for (int it = 0; it < 100; ++it) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fa = dec[i] * a + b;
      double p, q;
      if (fa >= 0) {
        p = std::exp(-fa) / (1.0 + std::exp(-fa));
        q = 1.0 / (1.0 + std::exp(-fa));
      } else {
        p = 1.0 / (1.0 + std::exp(fa));
        q = std::exp(fa) / (1.0 + std::exp(fa));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

// r(i, j) = P(class i | class i or j). Returns the coupled distribution.
std::vector<double> couple(const MatrixD& r) {
  const std::size_t k = r.rows();
  MatrixD q(k, k, 0.0);
  std::vector<double> p(k, 1.0 / static_cast<double>(k)), qp(k);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      if (j == t) continue;
      q(t, t) += r(j, t) * r(j, t);
      q(t, j) = -r(j, t) * r(t, j);
    }
  }
  const int max_iter = std::max(100, static_cast<int>(k));
  const double eps = 0.005 / static_cast<double>(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    double pqp = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      qp[t] = 0.0;
      for (std::size_t j = 0; j < k; ++j) qp[t] += q(t, j) * p[j];
      pqp += p[t] * qp[t];
    }
    double max_err = 0.0;
    for (std::size_t t = 0; t < k; ++t) max_err = std::max(max_err, std::abs(qp[t] - pqp));
    if (max_err < eps) break;
    for (std::size_t t = 0; t < k; ++t) {
      const double diff = (-qp[t] + pqp) / q(t, t);
      p[t] += diff;
      pqp = (pqp + diff * (diff * q(t, t) + 2.0 * qp[t])) / (1.0 + diff) / (1.0 + diff);
      for (std::size_t j = 0; j < k; ++j) {
        qp[j] = (qp[j] + diff * q(t, j)) / (1.0 + diff);
        p[j] /= (1.0 + diff);
      }
    }
  }
  return p;
}

class Svm final : public Classifier {
 public:
  void fit(const MatrixF& x, std::span<const int> y, int num_classes,
           const ClassifierSpec& spec) override {
    num_classes_ = num_classes;
    const double c = spec.param("C");
    const double eps = spec.param("tol");
    const auto max_iter = static_cast<long long>(spec.param("max_iter"));
    gamma_ = spec.param("gamma");
    const std::size_t n = x.rows(), d = x.cols();
    if (gamma_ == 0.0) {
      double sum = 0.0, sq = 0.0;
      for (float v : x.data()) {
        sum += v;
        sq += static_cast<double>(v) * v;
      }
      const double cnt = static_cast<double>(x.data().size());
      const double var = sq / cnt - (sum / cnt) * (sum / cnt);
      gamma_ = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
    }

    // Full RBF Gram matrix over the training set.
    Eigen::Map<const RowMatrixF> xm(x.data().data(), static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(d));
    RowMatrixF dots = xm * xm.transpose();
    MatrixF gram(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d2 = static_cast<double>(dots(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))) +
                          dots(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) -
                          2.0 * dots(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        gram(i, j) = static_cast<float>(std::exp(-gamma_ * std::max(0.0, d2)));
      }
    }

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);

    std::vector<std::int64_t> sv_slot(n, -1);
    std::vector<std::size_t> support_rows;
    pairs_.clear();
    for (int a = 0; a < num_classes; ++a) {
      for (int b = a + 1; b < num_classes; ++b) {
        std::vector<std::size_t> idx;
        std::vector<int> ys;
        for (std::size_t i : by_class[static_cast<std::size_t>(a)]) { idx.push_back(i); ys.push_back(1); }
        for (std::size_t i : by_class[static_cast<std::size_t>(b)]) { idx.push_back(i); ys.push_back(-1); }
        std::vector<std::size_t> order(idx.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return idx[l] < idx[r]; });
        std::vector<std::size_t> sidx;
        std::vector<int> sys;
        for (std::size_t o : order) { sidx.push_back(idx[o]); sys.push_back(ys[o]); }

        SmoResult res = solve_smo(sidx, sys, gram, c, eps, max_iter);
        PairModel pm;
        pm.class_a = a;
        pm.class_b = b;
        pm.rho = res.rho;
        std::vector<double> dec(sidx.size(), -res.rho);
        for (std::size_t t = 0; t < sidx.size(); ++t) {
          if (res.alpha[t] <= 0.0) continue;
          const double coef = res.alpha[t] * sys[t];
          if (sv_slot[sidx[t]] < 0) {
            sv_slot[sidx[t]] = static_cast<std::int64_t>(support_rows.size());
            support_rows.push_back(sidx[t]);
          }
          pm.sv.push_back(static_cast<std::uint32_t>(sv_slot[sidx[t]]));
          pm.coef.push_back(coef);
          for (std::size_t u = 0; u < sidx.size(); ++u) dec[u] += coef * gram(sidx[t], sidx[u]);
        }
        std::tie(pm.sigmoid_a, pm.sigmoid_b) = fit_sigmoid(dec, sys);
        pairs_.push_back(std::move(pm));
      }
    }
    support_ = x.select_rows(support_rows);
    support_norms_ = norms(support_);
  }

  MatrixD predict_proba(const MatrixF& x) const override {
    const std::size_t n = x.rows(), k = static_cast<std::size_t>(num_classes_);
    MatrixD out(n, k, 0.0);
    if (n == 0) return out;
    const std::size_t s = support_.rows();
    Eigen::Map<const RowMatrixF> xm(x.data().data(), static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(x.cols()));
    Eigen::Map<const RowMatrixF> sm(support_.data().data(), static_cast<Eigen::Index>(s),
                                    static_cast<Eigen::Index>(support_.cols()));
    RowMatrixF dots = xm * sm.transpose();
    const std::vector<double> xn = norms(x);
    std::vector<double> kv(s);
    MatrixD r(k, k, 0.0);
    constexpr double kMinProb = 1e-7;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < s; ++t) {
        const double d2 = xn[i] + support_norms_[t] -
                          2.0 * dots(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        kv[t] = std::exp(-gamma_ * std::max(0.0, d2));
      }
      for (const PairModel& pm : pairs_) {
        double f = -pm.rho;
        for (std::size_t t = 0; t < pm.sv.size(); ++t) f += pm.coef[t] * kv[pm.sv[t]];
        const double fa = f * pm.sigmoid_a + pm.sigmoid_b;
        double p = fa >= 0 ? std::exp(-fa) / (1.0 + std::exp(-fa)) : 1.0 / (1.0 + std::exp(fa));
        p = std::clamp(p, kMinProb, 1.0 - kMinProb);
        r(static_cast<std::size_t>(pm.class_a), static_cast<std::size_t>(pm.class_b)) = p;
        r(static_cast<std::size_t>(pm.class_b), static_cast<std::size_t>(pm.class_a)) = 1.0 - p;
      }
      auto row = out.row(i);
      if (k == 2) {
        row[0] = r(0, 1);
        row[1] = r(1, 0);
      } else {
        const auto p = couple(r);
        std::copy(p.begin(), p.end(), row.begin());
      }
    }
    return out;
  }

  void save(BinaryWriter& w) const override {
    w.put<std::int32_t>(num_classes_);
    w.put<double>(gamma_);
    w.put_matrix(support_);
    w.put<std::uint64_t>(pairs_.size());
    for (const PairModel& pm : pairs_) {
      w.put(pm.class_a);
      w.put(pm.class_b);
      w.put_vector(pm.sv);
      w.put_vector(pm.coef);
      w.put(pm.rho);
      w.put(pm.sigmoid_a);
      w.put(pm.sigmoid_b);
    }
  }

  void load(BinaryReader& r) override {
    num_classes_ = r.get<std::int32_t>();
    gamma_ = r.get<double>();
    support_ = r.get_matrix<float>();
    const auto np = r.get<std::uint64_t>();
    pairs_.clear();
    for (std::uint64_t i = 0; i < np; ++i) {
      PairModel pm;
      pm.class_a = r.get<std::int32_t>();
      pm.class_b = r.get<std::int32_t>();
      pm.sv = r.get_vector<std::uint32_t>();
      pm.coef = r.get_vector<double>();
      pm.rho = r.get<double>();
      pm.sigmoid_a = r.get<double>();
      pm.sigmoid_b = r.get<double>();
      if (pm.sv.size() != pm.coef.size() || pm.class_a < 0 || pm.class_b >= num_classes_ ||
          pm.class_a >= pm.class_b) {
        fail(ErrorCode::kBundleError, "corrupt SVM pair model");
      }
      for (auto s : pm.sv) {
        if (s >= support_.rows()) fail(ErrorCode::kBundleError, "corrupt SVM support index");
      }
      pairs_.push_back(std::move(pm));
    }
    if (pairs_.size() != static_cast<std::size_t>(num_classes_ * (num_classes_ - 1) / 2)) {
      fail(ErrorCode::kBundleError, "SVM pair count does not match classes");
    }
    support_norms_ = norms(support_);
  }

 private:
  static std::vector<double> norms(const MatrixF& m) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (float v : m.row(i)) s += static_cast<double>(v) * v;
      out[i] = s;
    }
    return out;
  }

  int num_classes_ = 0;
  double gamma_ = 1.0;
  MatrixF support_;
  std::vector<double> support_norms_;
  std::vector<PairModel> pairs_;
};

}  // namespace

std::unique_ptr<Classifier> make_svm() { return std::make_unique<Svm>(); }

}  // namespace hpfens::internal

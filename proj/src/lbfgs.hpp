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

#ifndef HPFENS_SRC_LBFGS_HPP_
#define HPFENS_SRC_LBFGS_HPP_

#include <cmath>
#include <deque>
#include <functional>

#include <Eigen/Dense>

namespace hpfens::internal {

// f(x, grad) returns the objective and fills grad.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsResult {
  int iterations = 0;
  double value = 0.0;
  bool converged = false;
};

// Limited-memory BFGS with a backtracking Armijo line search. Stops when the
// gradient infinity norm drops below tol or after max_iter iterations.
inline LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd& x,
                                  int max_iter, double tol, int memory = 10) {
  Eigen::VectorXd g(x.size()), g_new(x.size());
  double fx = f(x, g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  LbfgsResult res;
  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    Eigen::VectorXd q = g;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[static_cast<std::size_t>(i)] = rho_hist[static_cast<std::size_t>(i)] *
                                       s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= a[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      q /= std::max(1.0, g.norm());
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += s_hist[i] * (a[i] - b);
    }
    Eigen::VectorXd dir = -q;
    double gd = g.dot(dir);
    if (gd >= 0.0) {  // not a descent direction; reset to steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g / std::max(1.0, g.norm());
      gd = g.dot(dir);
    }
    double step = 1.0;
    Eigen::VectorXd x_new;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) break;
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    x = std::move(x_new);
    g = g_new;
    const double prev = fx;
    fx = f_new;
    if (sy > 1e-10) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(prev - fx) <= 1e-12 * std::max({1.0, std::abs(prev), std::abs(fx)})) {
      res.converged = true;
      break;
    }
  }
  res.value = fx;
  return res;
}

}  // namespace hpfens::internal

#endif  // HPFENS_SRC_LBFGS_HPP_

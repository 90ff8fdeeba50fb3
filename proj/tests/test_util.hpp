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

// Shared fixtures: scratch directories, synthetic image datasets and
// Gaussian blob feature sets.

#ifndef HPFENS_TESTS_TEST_UTIL_HPP_
#define HPFENS_TESTS_TEST_UTIL_HPP_

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "hpfens/common.hpp"

namespace hpfens::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hpfens_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Isotropic Gaussian blobs; class c is centred at sep * e_(c mod d).
inline void gaussian_blobs(std::size_t per_class, int k, std::size_t d, double sep, double sigma,
                           std::uint64_t seed, MatrixF& x, Labels& y) {
  Rng rng(seed);
  x = MatrixF(per_class * static_cast<std::size_t>(k), d);
  y.clear();
  std::size_t row = 0;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < k; ++c, ++row) {
      for (std::size_t j = 0; j < d; ++j) {
        const double centre = (j == static_cast<std::size_t>(c) % d) ? sep : 0.0;
        x(row, j) = static_cast<float>(centre + sigma * rng.normal());
      }
      y.push_back(c);
    }
  }
}

}  // namespace hpfens::testing

#endif  // HPFENS_TESTS_TEST_UTIL_HPP_

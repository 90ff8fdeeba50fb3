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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hpfens/common.hpp"
#include "test_util.hpp"

namespace hpfens {
namespace {

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Sha256, FileMatchesBytes) {
  testing::TempDir dir;
  write_file_atomic(dir / "x.bin", "hello world");
  EXPECT_EQ(sha256_file_hex(dir / "x.bin"), sha256_hex("hello world"));
  EXPECT_EQ(read_file(dir / "x.bin"), "hello world");
}

TEST(Rng, DeterministicPerSeed) {
  Rng a(7), b(7), c(8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    differs |= va != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, BoundedDrawsStayInRange) {
  Rng rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  std::multiset<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s.count(i), 1u);
}

TEST(DeriveSeed, StableAndStageSensitive) {
  EXPECT_EQ(derive_seed(42, "split"), derive_seed(42, "split"));
  EXPECT_NE(derive_seed(42, "split"), derive_seed(42, "folds"));
  EXPECT_NE(derive_seed(42, "split"), derive_seed(43, "split"));
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(1.0), "1");
  EXPECT_EQ(format_real(0.85), "0.85");
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
}

TEST(Matrix, ShapeCheckedAndRowSelect) {
  EXPECT_THROW(MatrixD(2, 2, std::vector<double>{1, 2, 3}), Error);
  MatrixD m(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> idx = {2, 0};
  const MatrixD s = m.select_rows(idx);
  EXPECT_EQ(s, MatrixD(2, 2, std::vector<double>{5, 6, 1, 2}));
}

TEST(Errors, ExitCodesByCategory) {
  EXPECT_EQ(exit_code_for(ErrorCode::kConfigError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kMissingClassDir), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kBundleError), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::kInternal), 5);
  EXPECT_STREQ(error_code_name(ErrorCode::kStaleCache), "StaleCache");
  try {
    fail(ErrorCode::kWeightError, "w");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWeightError);
    EXPECT_STREQ(e.what(), "w");
  }
}

}  // namespace
}  // namespace hpfens

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

#include <algorithm>
#include <numeric>

#include "hpfens/ensemble.hpp"
#include "test_util.hpp"

namespace hpfens {
namespace {

using C = ClassifierId;

// Lung accuracy grid (percent) over VGG16, VGG19, MobileNet, DenseNet169,
// DenseNet201.
std::vector<AccuracyCell> lung_grid() {
  const std::vector<std::string> bb = {"vgg16", "vgg19", "mobilenet", "densenet169",
                                       "densenet201"};
  const std::map<C, std::vector<double>> rows = {
      {C::kRF, {93.57, 94.05, 95.71, 94.52, 96.9}},
      {C::kSVM, {96.9, 97.62, 98.57, 97.14, 98.1}},
      {C::kLR, {96.9, 96.67, 98.81, 97.14, 98.33}},
      {C::kMLP, {96.9, 96.67, 98.1, 97.62, 99.05}},
      {C::kXGB, {94.05, 95.71, 96.19, 95.95, 97.38}},
      {C::kLGB, {95.24, 96.43, 97.38, 96.67, 98.1}},
  };
  std::vector<AccuracyCell> cells;
  for (const auto& [id, accs] : rows) {
    for (std::size_t b = 0; b < bb.size(); ++b) cells.push_back({id, bb[b], accs[b] / 100.0});
  }
  return cells;
}

TEST(Leaderboard, LungGridAverages) {
  const Leaderboard board = build_leaderboard(lung_grid());
  EXPECT_EQ(board.backbones.size(), 5u);
  EXPECT_EQ(board.backbones.front(), "vgg16");
  const std::map<C, double> expected = {{C::kRF, 94.95},  {C::kSVM, 97.67}, {C::kLR, 97.57},
                                        {C::kMLP, 97.67}, {C::kXGB, 95.86}, {C::kLGB, 96.76}};
  for (const auto& [id, avg] : expected) {
    EXPECT_NEAR(board.row_averages.at(id) * 100.0, avg, 0.005) << classifier_name(id);
  }
  EXPECT_DOUBLE_EQ(*board.cell(C::kMLP, "densenet201"), 0.9905);
  EXPECT_EQ(board.cell(C::kMLP, "resnet"), std::nullopt);
}

TEST(Selection, LungGridPicksSvmMlpLr) {
  const HPFSelection s = select_top_k(build_leaderboard(lung_grid()), 3);
  EXPECT_EQ(s.selected, (std::vector<C>{C::kSVM, C::kMLP, C::kLR}));
  EXPECT_EQ(s.scores, (std::vector<double>{97.67, 97.67, 97.57}));
}

TEST(Selection, PerBackboneCriterion) {
  const Leaderboard board = build_leaderboard(lung_grid());
  const HPFSelection s =
      select_top_k(board, 2, SelectionCriterion::kPerBackbone, "densenet201");
  EXPECT_EQ(s.selected, (std::vector<C>{C::kMLP, C::kLR}));
  EXPECT_EQ(s.backbone, "densenet201");
  try {
    select_top_k(board, 2, SelectionCriterion::kPerBackbone, "resnet");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSelectionError);
  }
}

TEST(Selection, Errors) {
  const Leaderboard board = build_leaderboard(lung_grid());
  EXPECT_THROW(select_top_k(board, 0), Error);
  EXPECT_THROW(select_top_k(board, 7), Error);
  auto cells = lung_grid();
  cells.erase(std::remove_if(cells.begin(), cells.end(),
                             [](const AccuracyCell& c) { return c.classifier == C::kXGB; }),
              cells.end());
  try {
    build_leaderboard(cells);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIncompleteGrid);
  }
  const std::vector<C> subset = {C::kRF, C::kSVM, C::kLR, C::kMLP, C::kLGB};
  EXPECT_EQ(build_leaderboard(cells, subset).classifiers.size(), 5u);
  cells.push_back({C::kXGB, "vgg16", 1.5});
  try {
    build_leaderboard(cells);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericError);
  }
}

TEST(Selection, RankingScoreQuantizes) {
  EXPECT_EQ(ranking_score(0.976660, 2), 97.67);
  EXPECT_EQ(ranking_score(0.976680, 2), 97.67);
  EXPECT_EQ(ranking_score(0.97666, -1), 0.97666 * 100.0);
}

// Oracle: sort registry indices by (-score, index) and take k.
TEST(Selection, MatchesSortOracleWithTies) {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<AccuracyCell> cells;
    const int nb = 1 + static_cast<int>(rng.below(3));
    for (C id : kClassifierRegistry) {
      for (int b = 0; b < nb; ++b) {
        // Coarse values make exact ties common.
        cells.push_back({id, "b" + std::to_string(b), static_cast<double>(rng.below(5)) / 4.0});
      }
    }
    const Leaderboard board = build_leaderboard(cells);
    const int k = 1 + static_cast<int>(rng.below(6));
    std::vector<int> order(6);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(6);
    for (int i = 0; i < 6; ++i) {
      score[static_cast<std::size_t>(i)] =
          ranking_score(board.row_averages.at(kClassifierRegistry[static_cast<std::size_t>(i)]), 2);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    const HPFSelection s = select_top_k(board, k);
    ASSERT_EQ(s.selected.size(), static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      EXPECT_EQ(s.selected[static_cast<std::size_t>(i)],
                kClassifierRegistry[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }
  }
}

TEST(Selection, JsonRoundTrip) {
  const Leaderboard board = build_leaderboard(lung_grid());
  const Leaderboard b2 = leaderboard_from_json(leaderboard_to_json(board));
  EXPECT_EQ(b2.cells, board.cells);
  EXPECT_EQ(b2.backbones, board.backbones);
  const HPFSelection s = select_top_k(board, 3);
  EXPECT_EQ(selection_from_json(selection_to_json(s)), s);
  EXPECT_EQ(parse_criterion(criterion_name(SelectionCriterion::kPerBackbone)),
            SelectionCriterion::kPerBackbone);
}

TEST(HardVote, Examples) {
  EXPECT_EQ(hard_vote(Matrix<int>(1, 3, std::vector<int>{2, 2, 1})), Labels{2});
  EXPECT_EQ(hard_vote(Matrix<int>(1, 3, std::vector<int>{0, 1, 2})), Labels{0});
  EXPECT_EQ(hard_vote(Matrix<int>(1, 2, std::vector<int>{3, 1})), Labels{1});
  EXPECT_EQ(hard_vote(Matrix<int>(1, 1, std::vector<int>{4})), Labels{4});
  try {
    hard_vote(Matrix<int>(2, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEnsembleError);
  }
  try {
    hard_vote(Matrix<int>(1, 2, std::vector<int>{0, -1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLabelError);
  }
}

TEST(HardVote, UnanimityAndPermutationInvariance) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20), m = 1 + rng.below(7);
    Matrix<int> v(n, m);
    for (int& x : v.data()) x = static_cast<int>(rng.below(4));
    const Labels base = hard_vote(v);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix<int> p(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) p(i, j) = v(i, perm[j]);
    }
    EXPECT_EQ(hard_vote(p), base);
    for (std::size_t i = 0; i < n; ++i) std::fill(v.row(i).begin(), v.row(i).end(), base[i]);
    EXPECT_EQ(hard_vote(v), base);
  }
}

TEST(SoftVote, Examples) {
  const std::vector<MatrixD> p = {MatrixD(1, 2, std::vector<double>{0.6, 0.4}),
                                  MatrixD(1, 2, std::vector<double>{0.3, 0.7}),
                                  MatrixD(1, 2, std::vector<double>{0.55, 0.45})};
  const std::vector<double> uniform = {1, 1, 1};
  EXPECT_EQ(soft_vote(p, uniform), Labels{1});
  const std::vector<double> first = {1, 0, 0};
  EXPECT_EQ(soft_vote(p, first), Labels{0});
  const MatrixD avg = weighted_average(p, uniform);
  EXPECT_NEAR(avg(0, 0), 1.45 / 3, 1e-12);
  EXPECT_NEAR(avg(0, 1), 1.55 / 3, 1e-12);
  const std::vector<MatrixD> tie = {MatrixD(1, 2, std::vector<double>{0.5, 0.5})};
  EXPECT_EQ(soft_vote(tie, std::vector<double>{1}), Labels{0});
}

TEST(SoftVote, Errors) {
  const std::vector<MatrixD> p = {MatrixD(2, 3, 1.0 / 3), MatrixD(2, 3, 1.0 / 3)};
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  EXPECT_EQ(code_of([&] { soft_vote(p, std::vector<double>{1, -1}); }), ErrorCode::kWeightError);
  EXPECT_EQ(code_of([&] { soft_vote(p, std::vector<double>{0, 0}); }), ErrorCode::kWeightError);
  EXPECT_EQ(code_of([&] { soft_vote(p, std::vector<double>{1, std::nan("")}); }),
            ErrorCode::kWeightError);
  EXPECT_EQ(code_of([&] { soft_vote(p, std::vector<double>{1}); }), ErrorCode::kShapeError);
  const std::vector<MatrixD> bad = {MatrixD(2, 3), MatrixD(2, 2)};
  EXPECT_EQ(code_of([&] { soft_vote(bad, std::vector<double>{1, 1}); }), ErrorCode::kShapeError);
  EXPECT_EQ(code_of([&] { soft_vote(std::vector<MatrixD>{}, std::vector<double>{}); }),
            ErrorCode::kEnsembleError);
}

MatrixD random_probs(Rng& rng, std::size_t n, std::size_t k) {
  MatrixD p(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (double& v : p.row(i)) s += (v = rng.uniform());
    for (double& v : p.row(i)) v /= s;
  }
  return p;
}

TEST(SoftVote, ScaleInvarianceAndPermutation) {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(10), k = 2 + rng.below(4), m = 1 + rng.below(5);
    std::vector<MatrixD> p;
    std::vector<double> w;
    for (std::size_t j = 0; j < m; ++j) {
      p.push_back(random_probs(rng, n, k));
      w.push_back(0.25 + static_cast<double>(rng.below(4)));
    }
    const Labels base = soft_vote(p, w);
    std::vector<double> w4 = w;
    for (double& v : w4) v *= 4.0;  // power of two keeps sums exact
    EXPECT_EQ(soft_vote(p, w4), base);
    std::reverse(p.begin(), p.end());
    std::reverse(w.begin(), w.end());
    const MatrixD avg = weighted_average(p, w);
    EXPECT_EQ(argmax_rows(avg), soft_vote(p, w));
  }
}

TEST(CombineMembers, HardModeVoteShares) {
  const std::vector<MatrixD> p = {MatrixD(1, 3, std::vector<double>{0.6, 0.3, 0.1}),
                                  MatrixD(1, 3, std::vector<double>{0.1, 0.8, 0.1}),
                                  MatrixD(1, 3, std::vector<double>{0.2, 0.7, 0.1})};
  const EnsemblePrediction hard = combine_members(VoteMode::kHard, p, std::vector<double>{5, 1, 1});
  EXPECT_EQ(hard.labels, Labels{1});
  EXPECT_NEAR(hard.probabilities(0, 0), 1.0 / 3, 1e-12);
  EXPECT_NEAR(hard.probabilities(0, 1), 2.0 / 3, 1e-12);
  const EnsemblePrediction soft = combine_members(VoteMode::kSoft, p, std::vector<double>{5, 1, 1});
  EXPECT_EQ(soft.labels, Labels{0});
  EXPECT_EQ(parse_vote_mode(vote_mode_name(VoteMode::kHard)), VoteMode::kHard);
}

class EnsembleModelTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::gaussian_blobs(30, 3, 4, 2.0, 1.0, 51, x_, y_);
    for (C id : {C::kSVM, C::kLR, C::kMLP}) {
      ClassifierSpec s;
      s.id = id;
      s.seed = 3;
      model_.members.push_back(train(s, x_, y_));
    }
  }
  MatrixF x_;
  Labels y_;
  EnsembleModel model_;
};

TEST_F(EnsembleModelTest, SoftMatchesSoftVote) {
  const EnsemblePrediction e = ensemble_predict(model_, x_);
  std::vector<MatrixD> probs;
  for (const auto& m : model_.members) probs.push_back(m.predict_proba(x_));
  EXPECT_EQ(e.labels, soft_vote(probs, std::vector<double>{1, 1, 1}));
  for (std::size_t i = 0; i < e.probabilities.rows(); ++i) {
    double s = 0;
    for (double v : e.probabilities.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  model_.mode = VoteMode::kHard;
  Matrix<int> votes(x_.rows(), 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const Labels l = model_.members[j].predict(x_);
    for (std::size_t i = 0; i < l.size(); ++i) votes(i, j) = l[i];
  }
  EXPECT_EQ(ensemble_predict(model_, x_).labels, hard_vote(votes));
}

TEST_F(EnsembleModelTest, SingleMemberEqualsMember) {
  EnsembleModel one;
  one.members = {model_.members[1]};
  EXPECT_EQ(ensemble_predict(one, x_).labels, model_.members[1].predict(x_));
  EXPECT_EQ(ensemble_predict(one, x_).probabilities, model_.members[1].predict_proba(x_));
}

TEST_F(EnsembleModelTest, WidthMismatch) {
  try {
    ensemble_predict(model_, MatrixF(1, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeError);
  }
}

TEST_F(EnsembleModelTest, SaveLoadRoundTrip) {
  testing::TempDir dir;
  model_.weights = {2, 1, 1};
  const LabelMap labels({"x", "y", "z"});
  save_ensemble(model_, labels, dir / "e");
  const EnsembleBundle b = load_ensemble(dir / "e");
  EXPECT_EQ(b.label_map, labels);
  EXPECT_EQ(b.model.weights, model_.weights);
  EXPECT_EQ(b.model.mode, model_.mode);
  EXPECT_EQ(ensemble_predict(b.model, x_).probabilities,
            ensemble_predict(model_, x_).probabilities);

  std::string text = read_file(dir / "e/ensemble.json");
  write_file_atomic(dir / "e/ensemble.json", text + "\n");
  try {
    load_ensemble(dir / "e");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBundleError);
  }
}

}  // namespace
}  // namespace hpfens

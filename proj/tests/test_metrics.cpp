#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "mmbeam/core/rng.hpp"
#include "mmbeam/metrics/dba.hpp"

using namespace mmbeam;
using namespace mmbeam::metrics;

namespace {

// Literal transcription of the metric definition, independent of dba_score.
DbaReport dba_oracle(const std::vector<int>& truths,
                     const std::vector<std::vector<int>>& ranked,
                     const DbaConfig& cfg) {
  const int N = static_cast<int>(truths.size());
  DbaReport rep;
  rep.n_samples = N;
  for (int k = 1; k <= cfg.K; ++k) {
    double sum = 0.0;
    for (int n = 0; n < N; ++n) {
      double best = 1e300;
      for (int kp = 1; kp <= k; ++kp) {
        double d = std::abs(ranked[n][kp - 1] - truths[n]) / cfg.delta;
        best = std::min(best, std::min(d, 1.0));
      }
      sum += best;
    }
    rep.per_rank.push_back(1.0 - sum / N);
  }
  rep.score = 0.0;
  for (double y : rep.per_rank) rep.score += y;
  rep.score /= cfg.K;
  return rep;
}

struct RandomInstance {
  std::vector<int> truths;
  std::vector<std::vector<int>> ranked;
};

RandomInstance random_instance(Rng& rng, int n, int M, int K) {
  RandomInstance inst;
  for (int i = 0; i < n; ++i) {
    inst.truths.push_back(rng.uniform_int(M));
    std::vector<int> r;
    for (int k = 0; k < K; ++k) r.push_back(rng.uniform_int(M));
    inst.ranked.push_back(std::move(r));
  }
  return inst;
}

}  // namespace

TEST(RankPredictions, OneHotFillsTiesByIndex) {
  std::vector<double> p(64, 0.0);
  p[7] = 1.0;
  auto r = rank_predictions(p, 3);
  EXPECT_EQ(r, (std::vector<int>{7, 0, 1}));
}

TEST(RankPredictions, StrictlyDecreasing) {
  std::vector<double> p = {0.5, 0.3, 0.1, 0.07, 0.03};
  EXPECT_EQ(rank_predictions(p, 3), (std::vector<int>{0, 1, 2}));
}

TEST(RankPredictions, MatchesFullSortPrefix) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(32);
    for (double& v : p) v = rng.uniform();
    auto got = rank_predictions(p, 5);
    std::vector<int> order(32);
    for (int i = 0; i < 32; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return p[a] > p[b]; });
    order.resize(5);
    EXPECT_EQ(got, order);
  }
}

TEST(RankPredictions, RejectsKBeyondM) {
  std::vector<double> p = {0.5, 0.5};
  EXPECT_THROW(rank_predictions(p, 3), std::invalid_argument);
}

TEST(DbaScore, ExactTopOneScoresOne) {
  DbaConfig cfg;
  auto rep = dba_score({10}, {{10, 3, 50}}, cfg);
  for (double y : rep.per_rank) EXPECT_DOUBLE_EQ(y, 1.0);
  EXPECT_DOUBLE_EQ(rep.score, 1.0);
}

TEST(DbaScore, HandComputedPartialCredit) {
  // truth 10, ranked [13, 10, 7], delta 5: Y1 = 1 - 3/5 = 0.4, Y2 = Y3 = 1.
  DbaConfig cfg;
  auto rep = dba_score({10}, {{13, 10, 7}}, cfg);
  EXPECT_NEAR(rep.per_rank[0], 0.4, 1e-12);
  EXPECT_NEAR(rep.per_rank[1], 1.0, 1e-12);
  EXPECT_NEAR(rep.per_rank[2], 1.0, 1e-12);
  EXPECT_NEAR(rep.score, 0.8, 1e-12);
}

TEST(DbaScore, SaturatedPenaltyScoresZero) {
  DbaConfig cfg;
  auto rep = dba_score({0, 40}, {{20, 30, 40}, {0, 10, 20}}, cfg);
  EXPECT_DOUBLE_EQ(rep.score, 0.0);
}

TEST(DbaScore, MatchesOracleOn1000RandomInstances) {
  Rng rng(99);
  DbaConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    auto inst = random_instance(rng, 1 + rng.uniform_int(20), 64, cfg.K);
    auto got = dba_score(inst.truths, inst.ranked, cfg);
    auto want = dba_oracle(inst.truths, inst.ranked, cfg);
    ASSERT_EQ(got.per_rank.size(), want.per_rank.size());
    for (size_t k = 0; k < want.per_rank.size(); ++k)
      ASSERT_DOUBLE_EQ(got.per_rank[k], want.per_rank[k]) << "trial " << trial;
    ASSERT_DOUBLE_EQ(got.score, want.score);
  }
}

TEST(DbaScore, PerRankMonotoneOnRandomInstances) {
  Rng rng(7);
  DbaConfig cfg;
  cfg.K = 5;
  for (int trial = 0; trial < 2000; ++trial) {
    auto inst = random_instance(rng, 1 + rng.uniform_int(8), 48, cfg.K);
    auto rep = dba_score(inst.truths, inst.ranked, cfg);
    for (int k = 1; k < cfg.K; ++k) {
      ASSERT_GE(rep.per_rank[k], rep.per_rank[k - 1] - 1e-15);
      ASSERT_GE(rep.per_rank[k], 0.0);
      ASSERT_LE(rep.per_rank[k], 1.0);
    }
  }
}

TEST(DbaScore, SmallDeltaEqualsTopOneAccuracy) {
  // With delta <= 1 and integer indices, any miss saturates: Y1 == top-1.
  Rng rng(31);
  DbaConfig cfg;
  cfg.K = 3;
  cfg.delta = 0.5;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = random_instance(rng, 1 + rng.uniform_int(30), 16, cfg.K);
    auto rep = dba_score(inst.truths, inst.ranked, cfg);
    EXPECT_NEAR(rep.per_rank[0], topk_accuracy(inst.truths, inst.ranked, 1),
                1e-12);
  }
}

TEST(DbaScore, PermutingSamplesLeavesReportUnchanged) {
  Rng rng(13);
  DbaConfig cfg;
  auto inst = random_instance(rng, 50, 64, cfg.K);
  auto base = dba_score(inst.truths, inst.ranked, cfg);
  std::vector<int> perm(50);
  for (int i = 0; i < 50; ++i) perm[i] = i;
  rng.shuffle(perm);
  RandomInstance shuffled;
  for (int i : perm) {
    shuffled.truths.push_back(inst.truths[i]);
    shuffled.ranked.push_back(inst.ranked[i]);
  }
  auto rep = dba_score(shuffled.truths, shuffled.ranked, cfg);
  EXPECT_NEAR(rep.score, base.score, 1e-12);
  for (int k = 0; k < cfg.K; ++k)
    EXPECT_NEAR(rep.per_rank[k], base.per_rank[k], 1e-12);
}

TEST(DbaScore, RejectsEmptyAndMalformed) {
  DbaConfig cfg;
  EXPECT_THROW(dba_score({}, {}, cfg), std::invalid_argument);
  EXPECT_THROW(dba_score({1}, {{1, 2}}, cfg), std::invalid_argument);
}

TEST(TopkAccuracy, Basics) {
  EXPECT_DOUBLE_EQ(topk_accuracy({3, 5}, {{3, 1, 2}, {5, 0, 1}}, 1), 1.0);
  EXPECT_DOUBLE_EQ(topk_accuracy({3, 5}, {{0, 1, 2}, {9, 8, 7}}, 3), 0.0);
}

TEST(TopkAccuracy, MatchesCountingOracle) {
  Rng rng(55);
  auto inst = random_instance(rng, 50, 16, 3);
  for (int k = 1; k <= 3; ++k) {
    int hits = 0;
    for (int n = 0; n < 50; ++n)
      for (int j = 0; j < k; ++j)
        if (inst.ranked[n][j] == inst.truths[n]) {
          ++hits;
          break;
        }
    EXPECT_DOUBLE_EQ(topk_accuracy(inst.truths, inst.ranked, k), hits / 50.0);
  }
}

TEST(ReportJson, ContractFields) {
  DbaConfig cfg;
  auto rep = dba_score({10}, {{13, 10, 7}}, cfg);
  auto j = report_json(rep, 0.25, 0.75);
  EXPECT_EQ(j["Y"].size(), 3u);
  EXPECT_NEAR(j["dba"].get<double>(), 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(j["top1"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(j["top3"].get<double>(), 0.75);
  EXPECT_EQ(j["n"].get<int>(), 1);
}

#include "hirs/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hirs;

TEST(Ranking, PerfectRankingScoresOne) {
  const std::vector<ScoredItem> items{{1, 10, 0.9, 1}, {1, 11, 0.5, 0}, {1, 12, 0.1, 0}};
  const RankingMetrics m = rank_metrics(items, {10});
  EXPECT_EQ(m.recall_at(10), 1.0);
  EXPECT_EQ(m.ndcg_at(10), 1.0);
  EXPECT_EQ(m.users, 1u);
}

TEST(Ranking, RelevantAtRankTwoOfTwo) {
  const std::vector<ScoredItem> items{{1, 10, 0.2, 1}, {1, 11, 0.7, 0}};
  const RankingMetrics m = rank_metrics(items, {10});
  EXPECT_EQ(m.recall_at(10), 1.0);
  EXPECT_EQ(m.ndcg_at(10), 1.0 / std::log2(3.0));
}

TEST(Ranking, HandComputedTwoUsers) {
  // User 1: relevant at ranks 1 and 3 of 4. User 2: relevant at rank 2 of 3.
  // User 3 has no relevant item and is skipped.
  const std::vector<ScoredItem> items{
      {1, 1, 0.9, 1}, {1, 2, 0.8, 0}, {1, 3, 0.7, 1}, {1, 4, 0.1, 0},
      {2, 5, 0.3, 0}, {2, 6, 0.2, 1}, {2, 7, 0.1, 0},
      {3, 8, 0.5, 0}};
  const RankingMetrics m = rank_metrics(items, {1, 2, 10});
  EXPECT_EQ(m.users, 2u);
  EXPECT_EQ(m.skipped_users, 1u);
  EXPECT_DOUBLE_EQ(m.recall_at(1), (0.5 + 0.0) / 2);
  EXPECT_DOUBLE_EQ(m.recall_at(2), (0.5 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(m.recall_at(10), 1.0);
  const double u1 = (1.0 + 1.0 / 2.0) / (1.0 + 1.0 / std::log2(3.0));
  const double u2 = 1.0 / std::log2(3.0);
  EXPECT_NEAR(m.ndcg_at(10), (u1 + u2) / 2, 1e-15);
  EXPECT_NEAR(m.ndcg_at(1), 0.5, 1e-15);
}

TEST(Ranking, TiesBreakByItemId) {
  const std::vector<ScoredItem> items{{1, 20, 0.5, 0}, {1, 10, 0.5, 1}};
  EXPECT_EQ(rank_metrics(items, {1}).recall_at(1), 1.0);
  const auto ranked = rank_by_user(items);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].items.front().item, 10);
}

TEST(Ranking, RandomScoresMatchExpectedRecall) {
  const int users = 4000, candidates = 40, k = 10;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredItem> items;
  for (int user = 0; user < users; ++user) {
    for (int c = 0; c < candidates; ++c) items.push_back({user, c, u(rng), c == 0 ? 1 : 0});
  }
  const RankingMetrics m = rank_metrics(items, {k});
  const double p = static_cast<double>(k) / candidates;
  const double sigma = std::sqrt(p * (1 - p) / users);
  EXPECT_LT(std::abs(m.recall_at(k) - p), 3 * sigma) << m.recall_at(k);
}

TEST(Ranking, BoundedAndMonotoneInK) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution rel(0.3);
  std::vector<ScoredItem> items;
  for (int user = 0; user < 50; ++user) {
    for (int c = 0; c < 30; ++c) items.push_back({user, c, u(rng), rel(rng) ? 1 : 0});
  }
  const std::vector<int> ks{1, 2, 5, 10, 20, 30};
  const RankingMetrics m = rank_metrics(items, ks);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    EXPECT_GE(m.recall[i], 0.0);
    EXPECT_LE(m.recall[i], 1.0);
    EXPECT_GE(m.ndcg[i], 0.0);
    EXPECT_LE(m.ndcg[i], 1.0);
    if (i > 0) {
      EXPECT_GE(m.recall[i], m.recall[i - 1]);
      EXPECT_GE(m.ndcg[i], m.ndcg[i - 1]);
    }
  }
  EXPECT_DOUBLE_EQ(m.recall_at(30), 1.0);
}

TEST(Accuracy, ThresholdsProbabilities) {
  std::vector<DataSample> s(4);
  s[0].label = 1;
  s[1].label = 0;
  s[2].label = 1;
  s[3].label = 0;
  EXPECT_DOUBLE_EQ(accuracy(s, {0.9, 0.1, 0.4, 0.6}), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(s, {0.9, 0.1, 0.4, 0.6}, 0.3), 0.75);
  EXPECT_THROW(accuracy(s, {0.5}), std::invalid_argument);
}

TEST(Orders, HistogramCountsColumns) {
  Tensor g(3, 4);
  g << 1, 0, 0.6, 0,
       1, 0, 0.4, 0,
       1, 1, 0.9, 0;
  EXPECT_EQ(column_orders(g), (std::vector<Index>{3, 1, 2, 0}));
  OrderHistogram h;
  h.add(g);
  EXPECT_EQ(h.total(), 4u);
  EXPECT_EQ(h.counts(), (std::vector<std::size_t>{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(h.fraction(0), 0.25);
  EXPECT_DOUBLE_EQ(h.mean_order(), 1.5);
  EXPECT_DOUBLE_EQ(h.fraction(7), 0.0);
  OrderHistogram strict(0.7);
  strict.add(g);
  EXPECT_DOUBLE_EQ(strict.mean_order(), (3 + 1 + 1) / 4.0);
}

TEST(Orders, IncidenceDumpSortsAndDropsEmptyColumns) {
  FeatureVocab vocab;
  vocab.add("user=1");
  vocab.add("item=7");
  vocab.add("genre=Drama");
  const DataSample s{{{0, 1.0}, {1, 1.0}, {2, 1.0}}, 1};
  Tensor g(3, 4);
  g << 1, 0, 0.6, 0,
       1, 0, 0.4, 0,
       1, 1, 0.9, 0;
  const std::string expected =
      "            e1 e2 e0\n"
      "             1  2  3  <- order\n"
      "user=1       0  1  1\n"
      "item=7       0  0  1\n"
      "genre=Drama  1  1  1\n";
  EXPECT_EQ(dump_incidence(s, g, vocab), expected);
  EXPECT_THROW(dump_incidence(s, Tensor::Ones(2, 2), vocab), ShapeError);
}

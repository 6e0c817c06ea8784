#include "hirs/synth.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace hirs;

namespace {

// Gates that put planted set q in column q and leave the rest empty.
std::vector<Tensor> oracle_gates(const PlantedSpec& spec, std::size_t n, Index k) {
  Tensor g = Tensor::Zero(spec.m, k);
  for (std::size_t q = 0; q < spec.interactions.size(); ++q) {
    for (Index i : spec.interactions[q].members) g(i, static_cast<Index>(q)) = 1.0;
  }
  return std::vector<Tensor>(n, g);
}

}  // namespace

TEST(PlantedSpec, ParseAndRoundTrip) {
  std::istringstream in(
      "# test spec\n"
      "m: 6\n"
      "noise: 0.25\n"
      "users: 7\n"
      "interaction: 4,1 coeff: 2.0\n"
      "interaction: 0,2,3 coeff: -1.5\n");
  const PlantedSpec s = PlantedSpec::parse(in);
  EXPECT_EQ(s.m, 6);
  EXPECT_DOUBLE_EQ(s.noise, 0.25);
  EXPECT_EQ(s.users, 7);
  ASSERT_EQ(s.interactions.size(), 2u);
  EXPECT_EQ(s.interactions[0].members, (std::vector<Index>{1, 4}));
  EXPECT_DOUBLE_EQ(s.interactions[1].coeff, -1.5);
  EXPECT_TRUE(s.is_member(3));
  EXPECT_FALSE(s.is_member(5));
  std::istringstream again(s.to_text());
  const PlantedSpec back = PlantedSpec::parse(again);
  EXPECT_EQ(back.m, s.m);
  EXPECT_EQ(back.interactions[1].members, s.interactions[1].members);
  EXPECT_DOUBLE_EQ(back.interactions[0].coeff, 2.0);
}

TEST(PlantedSpec, RejectsBadSets) {
  for (const char* text : {"m: 4\ninteraction: 1 coeff: 1\n", "m: 4\ninteraction: 1,9 coeff: 1\n",
                           "m: 4\ninteraction: 1,1 coeff: 1\n",
                           "m: 4\ninteraction: 1,2 coeff: 1\ninteraction: 2,1 coeff: 1\n", "m: 4\nbogus: 1\n"}) {
    std::istringstream in(text);
    EXPECT_ANY_THROW(PlantedSpec::parse(in)) << text;
  }
}

TEST(PlantedSpec, LogitIsSumOfProducts) {
  const PlantedSpec s = PlantedSpec::standard();
  std::vector<double> x(10, 1.0);
  EXPECT_DOUBLE_EQ(s.logit(x), 7.5);
  x[0] = -1.0;
  x[3] = -1.0;
  EXPECT_DOUBLE_EQ(s.logit(x), -2.5 - 2.5 + 2.5);
}

TEST(Generate, SeededAndWellFormed) {
  const PlantedSpec spec = PlantedSpec::standard();
  std::mt19937_64 a(1), b(1), c(2);
  const Dataset d1 = generate(spec, 500, a);
  const Dataset d2 = generate(spec, 500, b);
  const Dataset d3 = generate(spec, 500, c);
  EXPECT_EQ(d1.samples, d2.samples);
  EXPECT_NE(d1.samples, d3.samples);
  EXPECT_EQ(d1.vocab.size(), 10);
  EXPECT_EQ(d1.vocab.name(3), "f3");
  for (const DataSample& s : d1.samples) {
    ASSERT_EQ(s.size(), 10);
    for (Index i = 0; i < 10; ++i) {
      EXPECT_EQ(s.features[static_cast<std::size_t>(i)].id, i);
      EXPECT_EQ(std::abs(s.features[static_cast<std::size_t>(i)].value), 1.0);
    }
  }
}

TEST(Generate, LabelsFollowThePlant) {
  const PlantedSpec spec = PlantedSpec::standard();
  std::mt19937_64 rng(3);
  const Dataset d = generate(spec, 20000, rng);
  // The Bayes rule sign(logit) should reach the enumerated Bayes accuracy.
  double right = 0;
  for (const DataSample& s : d.samples) {
    std::vector<double> x;
    for (const Feature& f : s.features) x.push_back(f.value);
    right += (spec.logit(x) > 0 ? 1 : 0) == s.label;
  }
  const double acc = right / static_cast<double>(d.samples.size());
  const double bayes = oracle::bayes_accuracy(spec);
  EXPECT_NEAR(acc, bayes, 4 * std::sqrt(bayes * (1 - bayes) / 20000.0));
}

TEST(Recovery, OracleGatesRecoverThePlant) {
  const PlantedSpec spec = PlantedSpec::standard();
  std::mt19937_64 rng(4);
  const Dataset d = generate(spec, 50, rng);
  const RecoveryReport r = recovery_score(oracle_gates(spec, 50, 5), d.samples, spec, 0.5, rng, 50);
  EXPECT_DOUBLE_EQ(r.auc, 1.0);
  EXPECT_DOUBLE_EQ(r.mean_jaccard, 1.0);
  EXPECT_DOUBLE_EQ(r.order_distance, 0.0);
  EXPECT_DOUBLE_EQ(r.density, 7.0 / 50.0);
  EXPECT_LT(r.random_auc, 0.8);
}

TEST(Recovery, AllOnesGatesScoreSetSizeOverM) {
  const PlantedSpec spec = PlantedSpec::standard();
  std::mt19937_64 rng(5);
  const Dataset d = generate(spec, 20, rng);
  const std::vector<Tensor> gates(20, Tensor::Ones(10, 3));
  const RecoveryReport r = recovery_score(gates, d.samples, spec, 0.5, rng, 10);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);
  ASSERT_EQ(r.jaccard.size(), 3u);
  EXPECT_DOUBLE_EQ(r.jaccard[0], 0.2);
  EXPECT_DOUBLE_EQ(r.jaccard[1], 0.3);
  EXPECT_DOUBLE_EQ(r.order_distance, 1.0);
  EXPECT_DOUBLE_EQ(r.random_auc, 0.5);
}

TEST(Recovery, MembershipAuc) {
  EXPECT_DOUBLE_EQ(membership_auc({0.9, 0.8, 0.1, 0.2}, {true, true, false, false}), 1.0);
  EXPECT_DOUBLE_EQ(membership_auc({0.1, 0.2, 0.9, 0.8}, {true, true, false, false}), 0.0);
  EXPECT_DOUBLE_EQ(membership_auc({0.5, 0.5}, {true, false}), 0.5);
  EXPECT_DOUBLE_EQ(membership_auc({0.9, 0.3, 0.5}, {true, true, false}), 0.5);
}

TEST(Median, OddAndEven) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
}

TEST(Variants, StandardSix) {
  const auto v = standard_variants();
  ASSERT_EQ(v.size(), 6u);
  EXPECT_EQ(v[0].name(), "full");
  EXPECT_EQ(v[5].name(), "no_hp+no_nm");
  EXPECT_EQ(AblationFlags::parse("no_nm+no_hp"), v[5]);
  EXPECT_ANY_THROW(AblationFlags::parse("no_xx"));
}

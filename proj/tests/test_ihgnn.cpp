#include "hirs/gradcheck.hpp"
#include "hirs/ihgnn.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace hirs;

namespace {

DataSample random_sample(Index vocab, Index m, std::mt19937_64& rng) {
  std::vector<Index> ids(static_cast<std::size_t>(vocab));
  std::iota(ids.begin(), ids.end(), Index{0});
  std::shuffle(ids.begin(), ids.end(), rng);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  DataSample s;
  for (Index i = 0; i < m; ++i) s.features.push_back({ids[static_cast<std::size_t>(i)], u(rng)});
  s.label = 1;
  return s;
}

// Hand-written hypergraph forward pass for a fixed incidence.
double ihgnn_oracle(const DataSample& s, const Tensor& inc, const IhgnnParams& p) {
  const Index m = s.size(), k = inc.cols(), d = p.emb.value.cols();
  Tensor v(m, d);
  for (Index i = 0; i < m; ++i) v.row(i) = p.emb.value.row(s.features[static_cast<std::size_t>(i)].id) * s.features[static_cast<std::size_t>(i)].value;
  Tensor h(k, d);
  for (Index j = 0; j < k; ++j) {
    Tensor sum = Tensor::Zero(1, d);
    for (Index i = 0; i < m; ++i) sum += inc(i, j) * v.row(i);
    Tensor hidden = (sum * p.w1.value + p.b1.value).cwiseMax(0.0);
    h.row(j) = hidden * p.w2.value + p.b2.value;
  }
  Tensor c = Tensor::Zero(1, d);
  for (Index i = 0; i < m; ++i) {
    Tensor patch = Tensor::Zero(1, d);
    double w = kPatchEps;
    for (Index j = 0; j < k; ++j) {
      patch += inc(i, j) * h.row(j);
      w += inc(i, j);
    }
    c += patch / w;
  }
  c /= static_cast<double>(m);
  return (c * p.readout_w.value)(0, 0) + p.readout_b.value(0, 0);
}

}  // namespace

TEST(FixedIncidence, ColumnCountsAndDegrees) {
  for (Index m = 2; m <= 10; ++m) {
    const Index pairs = m * (m - 1) / 2;
    const FixedIncidence fm = build_fm_incidence(m);
    EXPECT_EQ(fm.edges(), pairs + m);
    EXPECT_EQ(build_nfm_incidence(m).edges(), pairs + m);
    const FixedIncidence deep = build_deepfm_incidence(m);
    EXPECT_EQ(deep.edges(), pairs + m + 1);
    EXPECT_EQ(deep.degree(deep.edges() - 1), m);
    EXPECT_EQ(deep.column_kind.back(), EdgeModelKind::Mlp);
    EXPECT_EQ(build_pairwise_incidence(m).edges(), pairs);
    for (Index j = 0; j < pairs; ++j) EXPECT_EQ(fm.degree(j), 2);
    for (Index j = pairs; j < pairs + m; ++j) EXPECT_EQ(fm.degree(j), 1);
  }
}

TEST(FixedIncidence, ProductColumnsMustLinkOneOrTwoNodes) {
  FixedIncidence f = build_fm_incidence(4);
  f.incidence.col(0).setOnes();
  EXPECT_THROW(f.validate(), std::invalid_argument);
  f = build_fm_incidence(4);
  f.incidence(0, 0) = 0.5;
  EXPECT_THROW(f.validate(), std::invalid_argument);
  f = build_fm_incidence(4);
  f.column_kind.pop_back();
  EXPECT_THROW(f.validate(), ShapeError);
  EXPECT_NO_THROW(build_deepfm_incidence(4).validate());
}

TEST(FixedIncidence, FactorizationModelsMatchDirectFormulas) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Index> pick_m(2, 10), pick_d(1, 16);
  double worst_fm = 0, worst_nfm = 0, worst_deep = 0;
  for (int n = 0; n < 1000; ++n) {
    const Index m = pick_m(rng), d = pick_d(rng);
    const FactorizationParams p = FactorizationParams::init(20, d, 8, rng);
    const DataSample s = random_sample(20, m, rng);
    worst_fm = std::max(worst_fm, std::abs(score_fixed_incidence(s, build_fm_incidence(m), p).score - oracle::fm(s, p)));
    worst_nfm = std::max(worst_nfm, std::abs(score_fixed_incidence(s, build_nfm_incidence(m), p).score - oracle::nfm(s, p)));
    const FixedScore deep = score_fixed_incidence(s, build_deepfm_incidence(m), p);
    worst_deep = std::max(worst_deep, std::abs(deep.score - oracle::deepfm(s, p)));
    ASSERT_EQ(deep.mlp_columns.size(), 1u);
    EXPECT_EQ(deep.mlp_columns[0], m * (m - 1) / 2 + m);
  }
  EXPECT_LT(worst_fm, 1e-9);
  EXPECT_LT(worst_nfm, 1e-9);
  EXPECT_LT(worst_deep, 1e-9);
}

TEST(FixedIncidence, SampleSizeMustMatchIncidence) {
  std::mt19937_64 rng(12);
  const FactorizationParams p = FactorizationParams::init(10, 4, 4, rng);
  EXPECT_THROW(score_fixed_incidence(random_sample(10, 3, rng), build_fm_incidence(4), p), ShapeError);
}

TEST(Ihgnn, FixedIncidenceThroughFullPathMatchesOracle) {
  std::mt19937_64 rng(13);
  for (Index m = 2; m <= 6; ++m) {
    IhgnnParams p = IhgnnParams::init(12, 5, 7, 0.5, rng);
    const DataSample s = random_sample(12, m, rng);
    const FixedIncidence inc = build_pairwise_incidence(m);
    EXPECT_NEAR(score_with_incidence(s, inc, p), ihgnn_oracle(s, inc.incidence, p), 1e-12);
  }
}

TEST(Ihgnn, ReadoutShapesAndEmptyEdges) {
  std::mt19937_64 rng(14);
  IhgnnParams p = IhgnnParams::init(8, 3, 4, 0.5, rng);
  const DataSample s = random_sample(8, 4, rng);
  Tensor gates = Tensor::Zero(4, 3);
  gates.col(1).setOnes();
  const EdgeReprSet r = evaluate_ihgnn(s, gates, p);
  EXPECT_EQ(r.h.rows(), 3);
  EXPECT_EQ(r.node_patch.rows(), 4);
  EXPECT_EQ(r.c.cols(), 3);
  EXPECT_NEAR(r.logit, ihgnn_oracle(s, gates, p), 1e-12);
  EXPECT_NEAR(r.probability, oracle::sigmoid(r.logit), 1e-15);
  // A node outside every edge contributes a zero patch rather than NaN.
  gates.row(0).setZero();
  const EdgeReprSet r0 = evaluate_ihgnn(s, gates, p);
  EXPECT_TRUE(r0.node_patch.row(0).isZero());
  EXPECT_TRUE(std::isfinite(r0.logit));
  EXPECT_THROW(evaluate_ihgnn(s, Tensor::Ones(3, 3), p), ShapeError);
}

TEST(Ihgnn, LinearEdgeModelDropsRelu) {
  std::mt19937_64 rng(15);
  IhgnnParams p = IhgnnParams::init(6, 3, 4, 0.5, rng);
  const DataSample s = random_sample(6, 3, rng);
  const Tensor gates = Tensor::Ones(3, 2);
  // Without the ReLU the logit is affine in the embeddings: doubling all
  // feature values doubles the input-dependent part.
  DataSample twice = s;
  for (Feature& f : twice.features) f.value *= 2.0;
  const double zero_part = (p.b2.value * p.readout_w.value)(0, 0) + p.readout_b.value(0, 0);
  const double a = evaluate_ihgnn(s, gates, p, false).logit - zero_part;
  const double b = evaluate_ihgnn(twice, gates, p, false).logit - zero_part;
  EXPECT_NEAR(b, 2.0 * a, 1e-10);
}

TEST(Ihgnn, ForwardGradientsCheck) {
  std::mt19937_64 rng(16);
  IhgnnParams p = IhgnnParams::init(7, 3, 4, 0.5, rng);
  const DataSample a = random_sample(7, 3, rng);
  const DataSample b = random_sample(7, 2, rng);
  const DataSample* both[] = {&a, &b};
  const NodeBatch nodes = NodeBatch::from(both);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  Tensor gates(5, 2);
  for (Index i = 0; i < gates.size(); ++i) gates.data()[i] = u(rng);
  const std::vector<double> targets{1.0, 0.0};
  const LossBuilder loss = [&](Tape& t) {
    Var g = t.constant(gates);
    Var h = edge_representations(t, nodes, g, p);
    return bce_with_logits(graph_readout(t, g, h, nodes.seg, p).logits, targets);
  };
  EXPECT_LT(gradcheck(loss, p.parameters()).max_rel_error, 1e-6);
}

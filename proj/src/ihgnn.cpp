#include "hirs/ihgnn.hpp"

namespace hirs {

IhgnnParams IhgnnParams::init(Index vocab, Index dim, Index hidden, double emb_std, std::mt19937_64& rng) {
  IhgnnParams p;
  p.emb = Parameter("net.emb", normal_init(vocab, dim, emb_std, rng));
  p.w1 = Parameter("net.w1", glorot_uniform(dim, hidden, rng));
  p.b1 = Parameter("net.b1", Tensor::Zero(1, hidden));
  p.w2 = Parameter("net.w2", glorot_uniform(hidden, dim, rng));
  p.b2 = Parameter("net.b2", Tensor::Zero(1, dim));
  p.readout_w = Parameter("net.readout_w", glorot_uniform(dim, 1, rng));
  p.readout_b = Parameter("net.readout_b", Tensor::Zero(1, 1));
  return p;
}

Var edge_representations(Tape& tape, const NodeBatch& nodes, Var gates, IhgnnParams& params, bool nonlinear) {
  Var v = scale_rows(gather_rows(tape, params.emb, nodes.ids), nodes.values);
  Var summed = segment_tmatmul(gates, v, nodes.seg);
  Var hidden = affine(summed, tape.param(params.w1), tape.param(params.b1));
  if (nonlinear) hidden = relu(hidden);
  return affine(hidden, tape.param(params.w2), tape.param(params.b2));
}

Readout graph_readout(Tape& tape, Var gates, Var h, const Segments& seg, IhgnnParams& params, double eps) {
  Readout r;
  Var weight = add_scalar(row_sum(gates), eps);
  r.node_patch = div_rows(segment_matmul(gates, h, seg), weight);
  r.graph = segment_mean(r.node_patch, seg);
  r.logits = affine(r.graph, tape.param(params.readout_w), tape.param(params.readout_b));
  return r;
}

EdgeReprSet evaluate_ihgnn(const DataSample& sample, const Tensor& gates, IhgnnParams& params, bool nonlinear) {
  if (gates.rows() != sample.size()) {
    throw ShapeError("evaluate_ihgnn: gates have " + std::to_string(gates.rows()) + " rows for " +
                     std::to_string(sample.size()) + " features");
  }
  Tape tape;
  const NodeBatch nodes = NodeBatch::from(sample);
  Var g = tape.constant(gates);
  Var h = edge_representations(tape, nodes, g, params, nonlinear);
  Readout r = graph_readout(tape, g, h, nodes.seg, params);
  EdgeReprSet out;
  out.h = h.value();
  out.node_patch = r.node_patch.value();
  out.c = r.graph.value();
  out.logit = r.logits.value()(0, 0);
  out.probability = 1.0 / (1.0 + std::exp(-out.logit));
  return out;
}

Index FixedIncidence::degree(Index column) const {
  return static_cast<Index>((incidence.col(column).array() != 0.0).count());
}

void FixedIncidence::validate() const {
  if (static_cast<Index>(column_kind.size()) != edges()) {
    throw ShapeError("fixed incidence: " + std::to_string(column_kind.size()) + " kinds for " +
                     std::to_string(edges()) + " columns");
  }
  if (!((incidence.array() == 0.0) || (incidence.array() == 1.0)).all()) {
    throw std::invalid_argument("fixed incidence must be binary");
  }
  for (Index j = 0; j < edges(); ++j) {
    const Index d = degree(j);
    if (column_kind[j] != EdgeModelKind::Mlp && (d < 1 || d > 2)) {
      throw std::invalid_argument("product edge column " + std::to_string(j) + " links " + std::to_string(d) +
                                  " nodes; expected 1 or 2");
    }
  }
}

namespace {

Tensor pair_columns(Index m, bool self_loops) {
  const Index pairs = m * (m - 1) / 2;
  Tensor inc = Tensor::Zero(m, pairs + (self_loops ? m : 0));
  Index col = 0;
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j, ++col) {
      inc(i, col) = 1.0;
      inc(j, col) = 1.0;
    }
  }
  if (self_loops) {
    for (Index i = 0; i < m; ++i, ++col) inc(i, col) = 1.0;
  }
  return inc;
}

void require_nodes(Index m) {
  if (m < 1) throw std::invalid_argument("incidence needs m >= 1");
}

}  // namespace

FixedIncidence build_fm_incidence(Index m) {
  require_nodes(m);
  FixedIncidence f;
  f.incidence = pair_columns(m, true);
  f.column_kind.assign(static_cast<std::size_t>(f.edges()), EdgeModelKind::DotProduct);
  f.readout = ReadoutKind::Sum;
  return f;
}

FixedIncidence build_nfm_incidence(Index m) {
  FixedIncidence f = build_fm_incidence(m);
  f.column_kind.assign(static_cast<std::size_t>(f.edges()), EdgeModelKind::ElementwiseProduct);
  f.readout = ReadoutKind::Mlp;
  return f;
}

FixedIncidence build_deepfm_incidence(Index m) {
  FixedIncidence f = build_fm_incidence(m);
  const Index k = f.edges();
  f.incidence.conservativeResize(m, k + 1);
  f.incidence.col(k).setOnes();
  f.column_kind.push_back(EdgeModelKind::Mlp);
  return f;
}

FixedIncidence build_pairwise_incidence(Index m) {
  require_nodes(m);
  FixedIncidence f;
  f.incidence = pair_columns(m, false);
  f.column_kind.assign(static_cast<std::size_t>(f.edges()), EdgeModelKind::Mlp);
  f.readout = ReadoutKind::Linear;
  return f;
}

FactorizationParams FactorizationParams::init(Index vocab, Index dim, Index hidden, std::mt19937_64& rng) {
  FactorizationParams p;
  p.emb = Parameter("fm.emb", normal_init(vocab, dim, 0.1, rng));
  p.linear = Parameter("fm.linear", normal_init(vocab, 1, 0.1, rng));
  p.bias = Parameter("fm.bias", normal_init(1, 1, 0.1, rng));
  p.w1 = Parameter("fm.w1", glorot_uniform(dim, hidden, rng));
  p.b1 = Parameter("fm.b1", normal_init(1, hidden, 0.1, rng));
  p.w2 = Parameter("fm.w2", glorot_uniform(hidden, 1, rng));
  p.b2 = Parameter("fm.b2", normal_init(1, 1, 0.1, rng));
  return p;
}

namespace {

double mlp_scalar(const Tensor& x, const FactorizationParams& p) {
  Tensor hidden = ((x * p.w1.value) + p.b1.value).cwiseMax(0.0);
  return (hidden * p.w2.value)(0, 0) + p.b2.value(0, 0);
}

}  // namespace

FixedScore score_fixed_incidence(const DataSample& sample, const FixedIncidence& inc, const FactorizationParams& p) {
  inc.validate();
  if (inc.nodes() != sample.size()) {
    throw ShapeError("score_fixed_incidence: incidence has " + std::to_string(inc.nodes()) + " rows for " +
                     std::to_string(sample.size()) + " features");
  }
  const Index m = sample.size();
  const Index d = p.emb.value.cols();
  Tensor v(m, d);
  for (Index i = 0; i < m; ++i) v.row(i) = p.emb.value.row(sample.features[i].id) * sample.features[i].value;

  // Edge aggregates, as in IHGNN's edge sum; the squared term recovers pairwise products.
  const Tensor sums = inc.incidence.transpose() * v;
  const Tensor squares = inc.incidence.transpose() * v.cwiseAbs2();

  FixedScore out;
  out.score = p.bias.value(0, 0);
  Tensor pooled = Tensor::Zero(1, d);
  for (Index j = 0; j < inc.edges(); ++j) {
    const EdgeModelKind kind = inc.column_kind[j];
    if (kind == EdgeModelKind::Mlp) {
      out.score += mlp_scalar(sums.row(j), p);
      out.mlp_columns.push_back(j);
      continue;
    }
    if (inc.degree(j) == 1) {
      Index i = 0;
      inc.incidence.col(j).maxCoeff(&i);
      out.score += p.linear.value(sample.features[i].id, 0) * sample.features[i].value;
      continue;
    }
    const Tensor product = 0.5 * (sums.row(j).cwiseAbs2() - squares.row(j));
    if (kind == EdgeModelKind::DotProduct || inc.readout == ReadoutKind::Sum) {
      out.score += product.sum();
    } else {
      pooled += product;
    }
  }
  if (inc.readout == ReadoutKind::Mlp) out.score += mlp_scalar(pooled, p);
  return out;
}

double score_with_incidence(const DataSample& sample, const FixedIncidence& inc, IhgnnParams& params) {
  inc.validate();
  return evaluate_ihgnn(sample, inc.incidence, params, true).logit;
}

}  // namespace hirs

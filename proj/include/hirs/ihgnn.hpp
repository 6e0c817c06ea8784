#pragma once

#include "hirs/edgegen.hpp"

#include <random>
#include <vector>

namespace hirs {

/// IHGNN parameters: its own embedding table (separate from the generator's),
/// the edge model f_E (d -> hidden -> d) and the linear readout d -> 1.
struct IhgnnParams {
  Parameter emb;
  Parameter w1, b1;
  Parameter w2, b2;
  Parameter readout_w, readout_b;

  static IhgnnParams init(Index vocab, Index dim, Index hidden, double emb_std, std::mt19937_64& rng);
  Index dim() const { return emb.value.cols(); }
  std::vector<Parameter*> parameters() { return {&emb, &w1, &b1, &w2, &b2, &readout_w, &readout_b}; }
};

inline constexpr double kPatchEps = 1e-8;

/// h_j = f_E(sum_i gates_ij * v_i) per sample; result is (B*k) x d, block n
/// holding sample n's k edges. `nonlinear = false` drops the ReLU in f_E.
Var edge_representations(Tape& tape, const NodeBatch& nodes, Var gates, IhgnnParams& params, bool nonlinear = true);

struct Readout {
  Var node_patch;  // N x d, gate-weighted mean of incident edge representations
  Var graph;       // B x d, mean of node patches per sample
  Var logits;      // B x 1
};

Readout graph_readout(Tape& tape, Var gates, Var h, const Segments& seg, IhgnnParams& params,
                      double eps = kPatchEps);

/// Value-level results for one sample.
struct EdgeReprSet {
  Tensor h;           // k x d
  Tensor node_patch;  // m x d
  Tensor c;           // 1 x d
  double logit = 0.0;
  double probability = 0.5;
};

EdgeReprSet evaluate_ihgnn(const DataSample& sample, const Tensor& gates, IhgnnParams& params, bool nonlinear = true);

// ---------------------------------------------------------------------------
// Fixed-incidence instantiations of classical factorization models.
// ---------------------------------------------------------------------------

enum class EdgeModelKind { DotProduct, ElementwiseProduct, Mlp };
enum class ReadoutKind { Sum, Linear, Mlp };

struct FixedIncidence {
  Tensor incidence;                        // m x k0, binary
  std::vector<EdgeModelKind> column_kind;  // per column
  ReadoutKind readout = ReadoutKind::Sum;

  Index nodes() const { return incidence.rows(); }
  Index edges() const { return incidence.cols(); }
  Index degree(Index column) const;
  /// Product-kind columns must link exactly 1 or 2 nodes; throws otherwise.
  void validate() const;
};

/// All C(m,2) unordered pairs (lexicographic) followed by m self-loops; dot-product edges, sum readout.
FixedIncidence build_fm_incidence(Index m);
/// FM columns with element-wise product edges and an MLP readout.
FixedIncidence build_nfm_incidence(Index m);
/// FM columns plus one all-ones column that is modeled by an MLP.
FixedIncidence build_deepfm_incidence(Index m);
/// All pairs without self-loops, MLP edges, mean aggregation and linear readout.
FixedIncidence build_pairwise_incidence(Index m);

/// Parameters shared by the factorization-model instantiations.
struct FactorizationParams {
  Parameter emb;     // V x d
  Parameter linear;  // V x 1, point-wise weights carried by self-loops
  Parameter bias;    // 1 x 1
  Parameter w1, b1;  // d -> hidden
  Parameter w2, b2;  // hidden -> 1

  static FactorizationParams init(Index vocab, Index dim, Index hidden, std::mt19937_64& rng);
};

struct FixedScore {
  double score = 0.0;
  std::vector<Index> mlp_columns;  // columns routed to the MLP edge model
};

/// Scores a sample through the hypergraph route: edge sums s_j = E^T V
/// (and E^T (V*V) for the product kinds), per-column edge model dispatch,
/// then the incidence's readout. Self-loops contribute their linear weight.
FixedScore score_fixed_incidence(const DataSample& sample, const FixedIncidence& inc, const FactorizationParams& p);

/// L0-SIGN style: fixed binary incidence fed through the full IHGNN path.
double score_with_incidence(const DataSample& sample, const FixedIncidence& inc, IhgnnParams& params);

}  // namespace hirs

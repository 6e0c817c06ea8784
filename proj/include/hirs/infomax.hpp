#pragma once

#include "hirs/tape.hpp"

#include <random>
#include <span>
#include <vector>

namespace hirs {

/// Bilinear discriminators: D_theta scores (edge, graph) pairs for s-Infomax,
/// D_omega scores (edge, edge) pairs for Infomin.
struct DiscriminatorParams {
  Parameter w_theta;
  Parameter w_omega;

  static DiscriminatorParams init(Index dim, std::mt19937_64& rng);
  std::vector<Parameter*> parameters() { return {&w_theta, &w_omega}; }
};

/// Discriminator training pairs as row indices into the representation
/// matrices they are drawn from. target 1 = "joint", 0 = "marginal".
struct PairBatch {
  std::vector<Index> left;
  std::vector<Index> right;
  std::vector<double> target;
  /// Set when the batch cannot produce pairs (single label, or k = 1).
  bool flagged = false;

  Index size() const { return static_cast<Index>(target.size()); }
  bool empty() const { return target.empty(); }
};

/// For every edge of every sample: one joint pair with the graph of a random
/// other same-label sample (the sample itself if it is the only one) and one
/// marginal pair with a random opposite-label graph. `left` indexes the
/// (B*k) x d edge matrix, `right` the B x d graph matrix.
PairBatch s_infomax_pairs(std::span<const int> labels, Index k, std::mt19937_64& rng);

/// For every edge i of every sample: (i, i) with target 1 and (i, j), j != i
/// drawn uniformly within the same sample, with target 0. Both sides index
/// the (B*k) x d edge matrix.
PairBatch infomin_pairs(Index samples, Index k, std::mt19937_64& rng);

/// Mean BCE of sigmoid(left^T W right) against the targets. Empty pair sets
/// give a constant zero with no gradient.
Var discriminator_loss(Var left, Var w, Var right, const PairBatch& pairs);

/// s-Infomax loss over edge representations `h` and graph representations `c`.
Var s_infomax_loss(Var h, Var c, Var w_theta, const PairBatch& pairs, bool detach_graphs = false);

/// Infomin loss; both sides pass through independent dropout masks.
Var infomin_loss(Var h, Var w_omega, const PairBatch& pairs, double dropout_p, Mode mode, std::mt19937_64& rng);

/// Discriminator probabilities sigmoid(left^T W right) for the given pairs.
Tensor discriminator_scores(const Tensor& left_rows, const Tensor& w, const Tensor& right_rows,
                            const PairBatch& pairs);

}  // namespace hirs

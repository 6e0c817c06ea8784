#include "hirs/infomax.hpp"

#include "hirs/edgegen.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hirs {

DiscriminatorParams DiscriminatorParams::init(Index dim, std::mt19937_64& rng) {
  DiscriminatorParams p;
  p.w_theta = Parameter("disc.w_theta", glorot_uniform(dim, dim, rng));
  p.w_omega = Parameter("disc.w_omega", glorot_uniform(dim, dim, rng));
  return p;
}

PairBatch s_infomax_pairs(std::span<const int> labels, Index k, std::mt19937_64& rng) {
  PairBatch pairs;
  std::array<std::vector<Index>, 2> members;
  for (std::size_t n = 0; n < labels.size(); ++n) members[static_cast<std::size_t>(labels[n] != 0)].push_back(static_cast<Index>(n));
  if (members[0].empty() || members[1].empty()) {
    pairs.flagged = true;
    return pairs;
  }
  const auto count = static_cast<std::size_t>(labels.size()) * static_cast<std::size_t>(k) * 2;
  pairs.left.reserve(count);
  pairs.right.reserve(count);
  pairs.target.reserve(count);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto& same = members[static_cast<std::size_t>(labels[n] != 0)];
    const auto& other = members[static_cast<std::size_t>(labels[n] == 0)];
    const auto self = static_cast<Index>(n);
    for (Index i = 0; i < k; ++i) {
      const Index row = self * k + i;
      Index pos = self;
      if (same.size() > 1) {
        // Uniform over the same-label samples other than this one.
        const auto at = static_cast<std::size_t>(std::lower_bound(same.begin(), same.end(), self) - same.begin());
        std::uniform_int_distribution<std::size_t> pick(0, same.size() - 2);
        std::size_t idx = pick(rng);
        if (idx >= at) ++idx;
        pos = same[idx];
      }
      std::uniform_int_distribution<std::size_t> pick_neg(0, other.size() - 1);
      pairs.left.push_back(row);
      pairs.right.push_back(pos);
      pairs.target.push_back(1.0);
      pairs.left.push_back(row);
      pairs.right.push_back(other[pick_neg(rng)]);
      pairs.target.push_back(0.0);
    }
  }
  return pairs;
}

PairBatch infomin_pairs(Index samples, Index k, std::mt19937_64& rng) {
  PairBatch pairs;
  if (k < 2) {
    pairs.flagged = true;
    return pairs;
  }
  std::uniform_int_distribution<Index> pick(0, k - 2);
  for (Index n = 0; n < samples; ++n) {
    for (Index i = 0; i < k; ++i) {
      const Index row = n * k + i;
      Index j = pick(rng);
      if (j >= i) ++j;
      pairs.left.push_back(row);
      pairs.right.push_back(row);
      pairs.target.push_back(1.0);
      pairs.left.push_back(row);
      pairs.right.push_back(n * k + j);
      pairs.target.push_back(0.0);
    }
  }
  return pairs;
}

Var discriminator_loss(Var left, Var w, Var right, const PairBatch& pairs) {
  if (pairs.empty()) return left.tape().scalar(0.0);
  return bce_with_logits(bilinear(left, w, right), pairs.target);
}

Var s_infomax_loss(Var h, Var c, Var w_theta, const PairBatch& pairs, bool detach_graphs) {
  if (pairs.empty()) return h.tape().scalar(0.0);
  Var graphs = detach_graphs ? detach(c) : c;
  return discriminator_loss(gather_rows(h, pairs.left), w_theta, gather_rows(graphs, pairs.right), pairs);
}

Var infomin_loss(Var h, Var w_omega, const PairBatch& pairs, double dropout_p, Mode mode, std::mt19937_64& rng) {
  if (pairs.empty()) return h.tape().scalar(0.0);
  Var left = dropout(gather_rows(h, pairs.left), dropout_p, mode, rng);
  Var right = dropout(gather_rows(h, pairs.right), dropout_p, mode, rng);
  return discriminator_loss(left, w_omega, right, pairs);
}

Tensor discriminator_scores(const Tensor& left_rows, const Tensor& w, const Tensor& right_rows,
                            const PairBatch& pairs) {
  Tensor out(pairs.size(), 1);
  for (Index p = 0; p < pairs.size(); ++p) {
    const double s = (left_rows.row(pairs.left[p]) * w * right_rows.row(pairs.right[p]).transpose())(0, 0);
    out(p, 0) = 1.0 / (1.0 + std::exp(-s));
  }
  return out;
}

}  // namespace hirs

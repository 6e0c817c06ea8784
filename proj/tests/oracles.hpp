#pragma once

// Independent reference implementations used only by tests. None of these
// call into the code paths they are compared against.

#include "hirs/ihgnn.hpp"
#include "hirs/synth.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using hirs::DataSample;
using hirs::FactorizationParams;
using hirs::Index;
using hirs::Tensor;

inline double relu(double x) { return x > 0 ? x : 0.0; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// relu(x W1 + b1) W2 + b2, written with explicit loops.
inline double mlp(const std::vector<double>& x, const FactorizationParams& p) {
  const Index hidden = p.w1.value.cols();
  double out = p.b2.value(0, 0);
  for (Index h = 0; h < hidden; ++h) {
    double a = p.b1.value(0, h);
    for (std::size_t i = 0; i < x.size(); ++i) a += x[i] * p.w1.value(static_cast<Index>(i), h);
    out += relu(a) * p.w2.value(h, 0);
  }
  return out;
}

inline std::vector<double> embed(const DataSample& s, std::size_t i, const FactorizationParams& p) {
  const Index d = p.emb.value.cols();
  std::vector<double> v(static_cast<std::size_t>(d));
  for (Index c = 0; c < d; ++c) v[static_cast<std::size_t>(c)] = p.emb.value(s.features[i].id, c) * s.features[i].value;
  return v;
}

inline double linear_part(const DataSample& s, const FactorizationParams& p) {
  double y = p.bias.value(0, 0);
  for (const auto& f : s.features) y += p.linear.value(f.id, 0) * f.value;
  return y;
}

/// FM: w0 + sum_i w_i x_i + sum_{i<j} <v_i, v_j> x_i x_j.
inline double fm(const DataSample& s, const FactorizationParams& p) {
  double y = linear_part(s, p);
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    const auto vi = embed(s, i, p);
    for (std::size_t j = i + 1; j < s.features.size(); ++j) {
      const auto vj = embed(s, j, p);
      for (std::size_t c = 0; c < vi.size(); ++c) y += vi[c] * vj[c];
    }
  }
  return y;
}

/// NFM: w0 + sum_i w_i x_i + MLP(sum_{i<j} (x_i v_i) * (x_j v_j)).
inline double nfm(const DataSample& s, const FactorizationParams& p) {
  std::vector<double> pooled(static_cast<std::size_t>(p.emb.value.cols()), 0.0);
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    const auto vi = embed(s, i, p);
    for (std::size_t j = i + 1; j < s.features.size(); ++j) {
      const auto vj = embed(s, j, p);
      for (std::size_t c = 0; c < vi.size(); ++c) pooled[c] += vi[c] * vj[c];
    }
  }
  return linear_part(s, p) + mlp(pooled, p);
}

/// DeepFM with the deep part reading the summed embeddings.
inline double deepfm(const DataSample& s, const FactorizationParams& p) {
  std::vector<double> total(static_cast<std::size_t>(p.emb.value.cols()), 0.0);
  for (std::size_t i = 0; i < s.features.size(); ++i) {
    const auto vi = embed(s, i, p);
    for (std::size_t c = 0; c < vi.size(); ++c) total[c] += vi[c];
  }
  return fm(s, p) + mlp(total, p);
}

/// Monte-Carlo P(gate > 0) for a hard concrete gate, sampled from scratch.
inline double gate_open_rate(double log_alpha, double gamma, double delta, double tau, int draws, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int open = 0;
  for (int n = 0; n < draws; ++n) {
    double u = unit(rng);
    u = std::min(std::max(u, 1e-6), 1.0 - 1e-6);
    const double s = sigmoid((std::log(u) - std::log(1.0 - u) + log_alpha) / tau);
    const double stretched = s * (delta - gamma) + gamma;
    if (std::min(1.0, std::max(0.0, stretched)) > 0.0) ++open;
  }
  return static_cast<double>(open) / draws;
}

/// Bayes-optimal accuracy of a noise-free planted spec by enumerating all 2^m sign vectors.
inline double bayes_accuracy(const hirs::PlantedSpec& spec) {
  const auto m = static_cast<std::size_t>(spec.m);
  double acc = 0.0;
  const std::size_t count = std::size_t{1} << m;
  std::vector<double> x(m);
  for (std::size_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < m; ++i) x[i] = (mask >> i) & 1u ? 1.0 : -1.0;
    double z = 0.0;
    for (const auto& q : spec.interactions) {
      double prod = q.coeff;
      for (Index i : q.members) prod *= x[static_cast<std::size_t>(i)];
      z += prod;
    }
    const double p = sigmoid(z);
    acc += std::max(p, 1.0 - p);
  }
  return acc / static_cast<double>(count);
}

}  // namespace oracle

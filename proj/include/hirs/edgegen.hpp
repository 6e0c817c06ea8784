#pragma once

#include "hirs/data.hpp"
#include "hirs/tape.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace hirs {

/// Stretch interval (gamma, delta) and temperature of the hard concrete gate.
struct HardConcreteConfig {
  double gamma = -0.1;
  double delta = 1.1;
  double tau = 0.66;

  void validate() const;
  /// tau * log(-gamma / delta); the L0 penalty is sigmoid(log_alpha - shift).
  double l0_shift() const;
};

/// Flattened node lists of a batch of samples: one row per (sample, feature).
struct NodeBatch {
  std::vector<Index> ids;
  std::vector<double> values;
  Segments seg;

  static NodeBatch from(std::span<const DataSample* const> samples);
  static NodeBatch from(const DataSample& sample);
};

Tensor glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng);
Tensor normal_init(Index rows, Index cols, double stddev, std::mt19937_64& rng);

/// Generator f_gen: node embeddings and the context MLP producing log-alpha.
struct EdgeGenParams {
  Parameter emb;
  Parameter w1, b1;
  Parameter w2, b2;

  static EdgeGenParams init(Index vocab, Index dim, Index hidden, Index k, double emb_std, std::mt19937_64& rng);
  Index k() const { return w2.value.cols(); }
  Index dim() const { return emb.value.cols(); }
  std::vector<Parameter*> parameters() { return {&emb, &w1, &b1, &w2, &b2}; }
};

/// Row i of the result is MLP([v_i, sum_{j != i} v_j]) with v_i = emb(o_i) * w_i,
/// read directly as log-alpha for the k gates of node i. Shape N x k.
Var node_context_logalpha(Tape& tape, const NodeBatch& nodes, EdgeGenParams& params);

/// Uniform draws for the gate noise, clamped to [1e-6, 1 - 1e-6].
Tensor draw_gate_noise(Index rows, Index cols, std::mt19937_64& rng);

/// Train-mode hard concrete gates for a fixed noise draw `z` (same shape as log-alpha).
Var sample_gates(Var logalpha, const HardConcreteConfig& cfg, const Tensor& z);
/// Deterministic gates: clamp(sigmoid(log_alpha) * (delta - gamma) + gamma, 0, 1).
Var eval_gates(Var logalpha, const HardConcreteConfig& cfg);
/// Sum over entries of sigmoid(log_alpha - tau * log(-gamma / delta)).
Var l0_penalty(Var logalpha, const HardConcreteConfig& cfg);

enum class GateMode { Train, Eval };

struct GateMatrix {
  Tensor values;
  GateMode mode = GateMode::Eval;
};

// Value-level conveniences for a single sample.
Tensor node_context_logalpha(const DataSample& sample, EdgeGenParams& params);
GateMatrix sample_gates(const Tensor& logalpha, const HardConcreteConfig& cfg, std::mt19937_64& rng);
GateMatrix eval_gates(const Tensor& logalpha, const HardConcreteConfig& cfg);
double l0_penalty(const Tensor& logalpha, const HardConcreteConfig& cfg);

/// One row per feature, one column per hyperedge, entries with 3 decimals.
std::string format_gate_matrix(const Tensor& gates);

}  // namespace hirs

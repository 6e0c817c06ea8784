#pragma once

#include "hirs/edgegen.hpp"
#include "hirs/ihgnn.hpp"
#include "hirs/infomax.hpp"

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hirs {

/// Component switches for the ablation variants.
struct AblationFlags {
  bool no_mi = false;  // drop both mutual-information losses
  bool no_l0 = false;  // drop the L0 activation penalty
  bool no_hp = false;  // bypass the generator; every gate is 1
  bool no_nm = false;  // linear edge model (no ReLU in f_E)

  /// "full", or the set flags joined by '+', e.g. "no_hp+no_nm".
  std::string name() const;
  /// Parses "full" or '+'-joined flag names.
  static AblationFlags parse(const std::string& s);
  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  Index dim = 64;
  Index k = 40;
  Index hidden = 64;
  HardConcreteConfig gates;
  double emb_init_std = 0.1;
};

/// Every trainable tensor: generator, IHGNN and both discriminators.
struct ModelState {
  EdgeGenParams gen;
  IhgnnParams net;
  DiscriminatorParams disc;

  static ModelState create(Index vocab, const ModelConfig& cfg, std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Index vocab_size() const { return gen.emb.value.rows(); }
};

/// Tape nodes of one batched forward pass.
struct ForwardPass {
  NodeBatch nodes;
  Var logalpha;  // N x k; invalid when the generator is bypassed
  Var gates;     // N x k
  Var edges;     // (B*k) x d
  Readout readout;
};

/// Train mode samples gate noise from `rng`; eval mode uses deterministic gates.
ForwardPass forward(Tape& tape, std::span<const DataSample* const> samples, ModelState& state,
                    const ModelConfig& cfg, const AblationFlags& flags, Mode mode, std::mt19937_64& rng);

/// Eval-mode click probabilities.
std::vector<double> predict(ModelState& state, const ModelConfig& cfg, const AblationFlags& flags,
                            std::span<const DataSample> samples, Index batch_size = 512);

/// Eval-mode gate matrix (m x k) of one sample.
Tensor sample_eval_gates(ModelState& state, const ModelConfig& cfg, const AblationFlags& flags,
                         const DataSample& sample);

}  // namespace hirs

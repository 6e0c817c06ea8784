#include "hirs/edgegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hirs {

void HardConcreteConfig::validate() const {
  if (!(gamma < 0.0 && delta > 0.0)) throw std::invalid_argument("hard concrete needs gamma < 0 < delta");
  if (!(tau > 0.0)) throw std::invalid_argument("hard concrete needs tau > 0");
}

double HardConcreteConfig::l0_shift() const { return tau * std::log(-gamma / delta); }

NodeBatch NodeBatch::from(std::span<const DataSample* const> samples) {
  NodeBatch b;
  for (const DataSample* s : samples) {
    if (s->features.empty()) throw DataError("sample with no features (empty hypergraph)");
    for (const Feature& f : s->features) {
      b.ids.push_back(f.id);
      b.values.push_back(f.value);
    }
    b.seg.push(s->size());
  }
  return b;
}

NodeBatch NodeBatch::from(const DataSample& sample) {
  const DataSample* p = &sample;
  return from(std::span<const DataSample* const>(&p, 1));
}

Tensor glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(fan_in, fan_out);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  return t;
}

Tensor normal_init(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
  return t;
}

EdgeGenParams EdgeGenParams::init(Index vocab, Index dim, Index hidden, Index k, double emb_std,
                                  std::mt19937_64& rng) {
  if (k < 1 || dim < 1 || hidden < 1) throw std::invalid_argument("edge generator needs k, d, hidden >= 1");
  EdgeGenParams p;
  p.emb = Parameter("gen.emb", normal_init(vocab, dim, emb_std, rng));
  p.w1 = Parameter("gen.w1", glorot_uniform(2 * dim, hidden, rng));
  p.b1 = Parameter("gen.b1", Tensor::Zero(1, hidden));
  p.w2 = Parameter("gen.w2", glorot_uniform(hidden, k, rng));
  p.b2 = Parameter("gen.b2", Tensor::Zero(1, k));
  return p;
}

Var node_context_logalpha(Tape& tape, const NodeBatch& nodes, EdgeGenParams& params) {
  Var v = scale_rows(gather_rows(tape, params.emb, nodes.ids), nodes.values);
  Var others = expand_segments(segment_sum(v, nodes.seg), nodes.seg) - v;
  Var hidden = relu(affine(concat_cols(v, others), tape.param(params.w1), tape.param(params.b1)));
  return affine(hidden, tape.param(params.w2), tape.param(params.b2));
}

Tensor draw_gate_noise(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor z(rows, cols);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = std::clamp(u(rng), 1e-6, 1.0 - 1e-6);
  return z;
}

Var sample_gates(Var logalpha, const HardConcreteConfig& cfg, const Tensor& z) {
  const Tensor logit_z = (z.array().log() - (1.0 - z.array()).log()).matrix();
  Var s = sigmoid(scale(add_const(logalpha, logit_z), 1.0 / cfg.tau));
  return clamp(add_scalar(scale(s, cfg.delta - cfg.gamma), cfg.gamma), 0.0, 1.0);
}

Var eval_gates(Var logalpha, const HardConcreteConfig& cfg) {
  return clamp(add_scalar(scale(sigmoid(logalpha), cfg.delta - cfg.gamma), cfg.gamma), 0.0, 1.0);
}

Var l0_penalty(Var logalpha, const HardConcreteConfig& cfg) {
  return sum(sigmoid(add_scalar(logalpha, -cfg.l0_shift())));
}

Tensor node_context_logalpha(const DataSample& sample, EdgeGenParams& params) {
  Tape tape;
  return node_context_logalpha(tape, NodeBatch::from(sample), params).value();
}

GateMatrix sample_gates(const Tensor& logalpha, const HardConcreteConfig& cfg, std::mt19937_64& rng) {
  Tape tape;
  const Tensor z = draw_gate_noise(logalpha.rows(), logalpha.cols(), rng);
  return {sample_gates(tape.constant(logalpha), cfg, z).value(), GateMode::Train};
}

GateMatrix eval_gates(const Tensor& logalpha, const HardConcreteConfig& cfg) {
  Tape tape;
  return {eval_gates(tape.constant(logalpha), cfg).value(), GateMode::Eval};
}

double l0_penalty(const Tensor& logalpha, const HardConcreteConfig& cfg) {
  Tape tape;
  return l0_penalty(tape.constant(logalpha), cfg).scalar();
}

std::string format_gate_matrix(const Tensor& gates) {
  std::ostringstream os;
  char buf[32];
  for (Index i = 0; i < gates.rows(); ++i) {
    for (Index j = 0; j < gates.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.3f", gates(i, j));
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace hirs

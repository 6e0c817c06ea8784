#include "hirs/model.hpp"

#include <cmath>
#include <sstream>

namespace hirs {

std::string AblationFlags::name() const {
  std::string out;
  const auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += n;
  };
  add(no_mi, "no_mi");
  add(no_l0, "no_l0");
  add(no_hp, "no_hp");
  add(no_nm, "no_nm");
  return out.empty() ? "full" : out;
}

AblationFlags AblationFlags::parse(const std::string& s) {
  AblationFlags f;
  if (s == "full" || s.empty()) return f;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, '+')) {
    if (tok == "no_mi") {
      f.no_mi = true;
    } else if (tok == "no_l0") {
      f.no_l0 = true;
    } else if (tok == "no_hp") {
      f.no_hp = true;
    } else if (tok == "no_nm") {
      f.no_nm = true;
    } else if (tok == "both") {
      f.no_hp = f.no_nm = true;
    } else {
      throw std::invalid_argument("unknown ablation flag '" + tok + "' (expected no_mi, no_l0, no_hp, no_nm, both)");
    }
  }
  return f;
}

ModelState ModelState::create(Index vocab, const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.gates.validate();
  ModelState s;
  s.gen = EdgeGenParams::init(vocab, cfg.dim, cfg.hidden, cfg.k, cfg.emb_init_std, rng);
  s.net = IhgnnParams::init(vocab, cfg.dim, cfg.hidden, cfg.emb_init_std, rng);
  s.disc = DiscriminatorParams::init(cfg.dim, rng);
  return s;
}

std::vector<Parameter*> ModelState::parameters() {
  std::vector<Parameter*> out = gen.parameters();
  for (Parameter* p : net.parameters()) out.push_back(p);
  for (Parameter* p : disc.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> ModelState::parameters() const {
  auto* self = const_cast<ModelState*>(this);
  std::vector<const Parameter*> out;
  for (Parameter* p : self->parameters()) out.push_back(p);
  return out;
}

ForwardPass forward(Tape& tape, std::span<const DataSample* const> samples, ModelState& state,
                    const ModelConfig& cfg, const AblationFlags& flags, Mode mode, std::mt19937_64& rng) {
  ForwardPass f;
  f.nodes = NodeBatch::from(samples);
  const Index n = f.nodes.seg.total();
  if (flags.no_hp) {
    f.gates = tape.constant(Tensor::Ones(n, cfg.k));
  } else {
    f.logalpha = node_context_logalpha(tape, f.nodes, state.gen);
    if (mode == Mode::Train) {
      f.gates = sample_gates(f.logalpha, cfg.gates, draw_gate_noise(n, cfg.k, rng));
    } else {
      f.gates = eval_gates(f.logalpha, cfg.gates);
    }
  }
  f.edges = edge_representations(tape, f.nodes, f.gates, state.net, !flags.no_nm);
  f.readout = graph_readout(tape, f.gates, f.edges, f.nodes.seg, state.net);
  return f;
}

std::vector<double> predict(ModelState& state, const ModelConfig& cfg, const AblationFlags& flags,
                            std::span<const DataSample> samples, Index batch_size) {
  std::vector<double> out;
  out.reserve(samples.size());
  std::mt19937_64 unused(0);
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const DataSample*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&samples[i]);
    Tape tape;
    ForwardPass f = forward(tape, ptrs, state, cfg, flags, Mode::Eval, unused);
    const Tensor& logits = f.readout.logits.value();
    for (Index i = 0; i < logits.rows(); ++i) out.push_back(1.0 / (1.0 + std::exp(-logits(i, 0))));
  }
  return out;
}

Tensor sample_eval_gates(ModelState& state, const ModelConfig& cfg, const AblationFlags& flags,
                         const DataSample& sample) {
  if (flags.no_hp) return Tensor::Ones(sample.size(), cfg.k);
  return eval_gates(node_context_logalpha(sample, state.gen), cfg.gates).values;
}

}  // namespace hirs

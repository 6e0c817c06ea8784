#include "hirs/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace hirs {

namespace {

template <typename F>
auto guarded(const char* component, F&& fn) {
  try {
    return fn();
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string("loss component '") + component + "' is not finite (" + e.what() + ")");
  }
}

void check_finite(const char* component, double v) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("loss component '") + component + "' is not finite");
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw std::invalid_argument("lambdas must be >= 0");
  if (model.k < 1) throw std::invalid_argument("k must be >= 1");
  if (model.dim < 1 || model.hidden < 1) throw std::invalid_argument("dim and hidden must be >= 1");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("dropout must be in [0, 1)");
  if (lr < 0) throw std::invalid_argument("lr must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (select_by != "recall10" && select_by != "ndcg10" && select_by != "accuracy") {
    throw std::invalid_argument("select_by must be recall10, ndcg10 or accuracy, got '" + select_by + "'");
  }
  model.gates.validate();
}

TrainConfig TrainConfig::from(const RunConfig& rc) {
  TrainConfig c;
  c.model.dim = rc.get_int("dim");
  c.model.k = rc.get_int("k");
  c.model.hidden = rc.get_int("hidden");
  c.model.gates.gamma = rc.get_double("gamma");
  c.model.gates.delta = rc.get_double("delta");
  c.model.gates.tau = rc.get_double("tau");
  c.model.emb_init_std = rc.get_double("emb_init_std");
  c.lambda1 = rc.get_double("lambda1");
  c.lambda2 = rc.get_double("lambda2");
  c.lambda3 = rc.get_double("lambda3");
  c.dropout = rc.get_double("dropout");
  c.lr = rc.get_double("lr");
  c.batch_size = rc.get_int("batch_size");
  c.epochs = static_cast<int>(rc.get_int("epochs"));
  c.seed = static_cast<std::uint64_t>(rc.get_int("seed"));
  c.flags = AblationFlags::parse(rc.get("flags"));
  c.eval_every = static_cast<int>(rc.get_int("eval_every"));
  c.select_by = rc.get("select_by");
  c.detach_graph_reprs = rc.get_bool("detach_graph_reprs");
  c.log_wall_time = rc.get_bool("log_wall_time");
  c.gate_threshold = rc.get_double("gate_threshold");
  c.validate();
  return c;
}

LossTerms total_loss(Tape& tape, const Batch& batch, ModelState& state, const TrainConfig& cfg,
                     std::mt19937_64& rng, Mode mode) {
  if (batch.samples.empty()) throw std::invalid_argument("total_loss: empty batch");
  const Index b = batch.size();
  const Index k = cfg.model.k;
  LossTerms t;

  ForwardPass f = guarded("bce", [&] { return forward(tape, batch.samples, state, cfg.model, cfg.flags, mode, rng); });
  std::vector<double> targets(static_cast<std::size_t>(b));
  std::vector<int> labels(static_cast<std::size_t>(b));
  for (Index n = 0; n < b; ++n) {
    labels[static_cast<std::size_t>(n)] = batch.samples[static_cast<std::size_t>(n)]->label;
    targets[static_cast<std::size_t>(n)] = labels[static_cast<std::size_t>(n)];
  }

  Var total = guarded("bce", [&] { return bce_with_logits(f.readout.logits, targets); });
  t.bce = total.scalar();
  check_finite("bce", t.bce);

  if (cfg.l0_weight() > 0) {
    Var l0 = guarded("l0", [&] {
      return scale(l0_penalty(f.logalpha, cfg.model.gates), cfg.l0_weight() / static_cast<double>(b));
    });
    t.l0 = l0.scalar();
    check_finite("l0", t.l0);
    total = total + l0;
  }
  if (cfg.smax_weight() > 0) {
    PairBatch pairs = s_infomax_pairs(labels, k, rng);
    t.single_label = pairs.flagged;
    Var s = guarded("smax", [&] {
      Var w = tape.param(state.disc.w_theta);
      return scale(s_infomax_loss(f.edges, f.readout.graph, w, pairs, cfg.detach_graph_reprs), cfg.smax_weight());
    });
    t.smax = s.scalar();
    check_finite("smax", t.smax);
    total = total + s;
  }
  if (cfg.min_weight() > 0) {
    PairBatch pairs = infomin_pairs(b, k, rng);
    Var m = guarded("min", [&] {
      Var w = tape.param(state.disc.w_omega);
      return scale(infomin_loss(f.edges, w, pairs, cfg.dropout, mode, rng), cfg.min_weight());
    });
    t.min = m.scalar();
    check_finite("min", t.min);
    total = total + m;
  }
  t.total = total;
  return t;
}

EvalResult evaluate(ModelState& state, const TrainConfig& cfg, std::span<const DataSample> samples) {
  EvalResult r;
  r.probs = predict(state, cfg.model, cfg.flags, samples);
  r.ranking = rank_metrics(score_items(samples, r.probs));
  r.accuracy = accuracy(samples, r.probs);
  return r;
}

std::string artifact_header(const std::string& producer, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["producer"] = producer;
  j["config_hash"] = config_hash;
  return j.dump();
}

MetricsLog::MetricsLog(std::ostream& out, const std::string& producer, const std::string& config_hash,
                       bool wall_time)
    : out_(out), wall_time_(wall_time) {
  out_ << artifact_header(producer, config_hash) << "\n";
}

void MetricsLog::write(const EpochRecord& r) {
  nlohmann::ordered_json j;
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  j["epoch"] = r.epoch;
  j["loss_total"] = r.loss_total;
  j["loss_bce"] = r.loss_bce;
  j["loss_l0"] = r.loss_l0;
  j["loss_smax"] = r.loss_smax;
  j["loss_min"] = r.loss_min;
  j["recall10"] = opt(r.recall10);
  j["ndcg10"] = opt(r.ndcg10);
  j["seconds"] = wall_time_ ? nlohmann::ordered_json(r.seconds) : nlohmann::ordered_json();
  j["accuracy"] = opt(r.accuracy);
  j["single_label_batches"] = r.single_label_batches;
  out_ << j.dump() << "\n";
  out_.flush();
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x48495253u};
  return std::mt19937_64(seq);
}

Trainer::Trainer(const TrainConfig& cfg, Index vocab_size)
    : cfg_(cfg), data_rng_(make_rng(cfg.seed, 1)), noise_rng_(make_rng(cfg.seed, 2)) {
  cfg_.validate();
  std::mt19937_64 init = make_rng(cfg.seed, 0);
  state_ = ModelState::create(vocab_size, cfg_.model, init);
  AdamOptions ao;
  ao.lr = cfg_.lr;
  opt_ = Adam(state_.parameters(), ao);
}

EpochRecord Trainer::run_epoch(std::span<const DataSample> train) {
  if (train.empty()) throw std::invalid_argument("run_epoch: empty training set");
  EpochRecord r;
  r.epoch = epoch_ + 1;
  double seen = 0.0;
  for (const Batch& batch : make_batches(train, cfg_.batch_size, true, data_rng_)) {
    opt_.zero_grad();
    Tape tape;
    LossTerms t = total_loss(tape, batch, state_, cfg_, noise_rng_, Mode::Train);
    tape.backward(t.total);
    opt_.step();
    const double w = static_cast<double>(batch.size());
    seen += w;
    r.loss_total += w * t.total.scalar();
    r.loss_bce += w * t.bce;
    r.loss_l0 += w * t.l0;
    r.loss_smax += w * t.smax;
    r.loss_min += w * t.min;
    r.single_label_batches += batch.single_label ? 1 : 0;
  }
  r.loss_total /= seen;
  r.loss_bce /= seen;
  r.loss_l0 /= seen;
  r.loss_smax /= seen;
  r.loss_min /= seen;
  ++epoch_;
  return r;
}

FitResult Trainer::fit(std::span<const DataSample> train, std::span<const DataSample> val, MetricsLog* log,
                       std::ostream* timing) {
  FitResult res;
  res.best_score = -std::numeric_limits<double>::infinity();
  bool evaluated = false;
  while (epoch_ < cfg_.epochs) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord r = run_epoch(train);
    const bool due = cfg_.eval_every > 0 && (r.epoch % cfg_.eval_every == 0 || r.epoch == cfg_.epochs);
    if (due && !val.empty()) {
      EvalResult e = evaluate(state_, cfg_, val);
      r.recall10 = e.ranking.recall_at(10);
      r.ndcg10 = e.ranking.ndcg_at(10);
      r.accuracy = e.accuracy;
      const double score = cfg_.select_by == "accuracy" ? e.accuracy
                           : cfg_.select_by == "ndcg10" ? *r.ndcg10
                                                        : *r.recall10;
      // Ties go to the later epoch.
      if (!evaluated || score >= res.best_score) {
        res.best = state_;
        res.best_epoch = r.epoch;
        res.best_score = score;
      }
      evaluated = true;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log) log->write(r);
    if (timing) *timing << "{\"epoch\":" << r.epoch << ",\"seconds\":" << r.seconds << "}\n";
    res.epochs.push_back(r);
  }
  if (!evaluated) {
    res.best = state_;
    res.best_epoch = epoch_;
  }
  return res;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1u << 30)) throw DataError("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u64(out, static_cast<std::uint64_t>(t.rows()));
  put_u64(out, static_cast<std::uint64_t>(t.cols()));
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
}

Tensor get_tensor(std::istream& in) {
  const auto rows = static_cast<Index>(get_u64(in));
  const auto cols = static_cast<Index>(get_u64(in));
  if (rows < 0 || cols < 0 || rows * cols > (Index{1} << 32)) throw DataError("checkpoint: implausible tensor shape");
  Tensor t(rows, cols);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
  if (!in) throw DataError("checkpoint truncated");
  return t;
}

template <typename Rng>
std::string rng_text(const Rng& r) {
  std::ostringstream s;
  s << r;
  return s.str();
}

struct CheckpointBody {
  std::uint64_t epoch = 0;
  std::string data_rng, noise_rng;
  std::vector<std::pair<std::string, Tensor>> params;
  struct Moments {
    long step;
    Tensor first, second;
  };
  std::vector<Moments> adam;
};

void write_checkpoint(const std::string& path, const std::string& producer, const std::string& config_hash,
                      const CheckpointBody& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << kCheckpointMagic << "\n" << artifact_header(producer, config_hash) << "\n";
  put_u64(out, body.epoch);
  put_string(out, body.data_rng);
  put_string(out, body.noise_rng);
  put_u64(out, body.params.size());
  for (const auto& [name, value] : body.params) {
    put_string(out, name);
    put_tensor(out, value);
  }
  put_u64(out, body.adam.size());
  for (const auto& m : body.adam) {
    put_u64(out, static_cast<std::uint64_t>(m.step));
    put_tensor(out, m.first);
    put_tensor(out, m.second);
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

CheckpointBody read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string magic, header;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw DataError(path + ": not a checkpoint (bad magic '" + magic + "')");
  std::getline(in, header);
  CheckpointBody b;
  b.epoch = get_u64(in);
  b.data_rng = get_string(in);
  b.noise_rng = get_string(in);
  const std::uint64_t np = get_u64(in);
  for (std::uint64_t i = 0; i < np; ++i) {
    std::string name = get_string(in);
    b.params.emplace_back(std::move(name), get_tensor(in));
  }
  const std::uint64_t na = get_u64(in);
  for (std::uint64_t i = 0; i < na; ++i) {
    CheckpointBody::Moments m;
    m.step = static_cast<long>(get_u64(in));
    m.first = get_tensor(in);
    m.second = get_tensor(in);
    b.adam.push_back(std::move(m));
  }
  return b;
}

void restore_params(std::vector<Parameter*> params, const CheckpointBody& body, const std::string& path) {
  if (params.size() != body.params.size()) {
    throw DataError(path + ": checkpoint has " + std::to_string(body.params.size()) + " parameters, model has " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = body.params[i];
    if (name != params[i]->name) throw DataError(path + ": parameter '" + name + "' where '" + params[i]->name + "' expected");
    if (value.rows() != params[i]->value.rows() || value.cols() != params[i]->value.cols()) {
      throw ShapeError("load " + name, params[i]->value, value);
    }
    params[i]->value = value;
    params[i]->zero_grad();
  }
}

CheckpointBody model_body(const ModelState& state) {
  CheckpointBody b;
  for (const Parameter* p : state.parameters()) b.params.emplace_back(p->name, p->value);
  return b;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path, const std::string& producer,
                              const std::string& config_hash) const {
  CheckpointBody b = model_body(state_);
  b.epoch = static_cast<std::uint64_t>(epoch_);
  b.data_rng = rng_text(data_rng_);
  b.noise_rng = rng_text(noise_rng_);
  for (const AdamState& s : opt_.states()) b.adam.push_back({s.step, s.first, s.second});
  write_checkpoint(path, producer, config_hash, b);
}

void Trainer::load_checkpoint(const std::string& path) {
  CheckpointBody b = read_checkpoint(path);
  restore_params(state_.parameters(), b, path);
  auto& states = opt_.states();
  if (b.adam.size() != states.size()) throw DataError(path + ": checkpoint has no matching optimizer state");
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (b.adam[i].first.rows() != states[i].first.rows() || b.adam[i].first.cols() != states[i].first.cols()) {
      throw ShapeError("load adam moments", states[i].first, b.adam[i].first);
    }
    states[i].step = b.adam[i].step;
    states[i].first = b.adam[i].first;
    states[i].second = b.adam[i].second;
  }
  std::istringstream(b.data_rng) >> data_rng_;
  std::istringstream(b.noise_rng) >> noise_rng_;
  epoch_ = static_cast<int>(b.epoch);
}

void save_model(const ModelState& state, const std::string& path, const std::string& producer,
                const std::string& config_hash) {
  write_checkpoint(path, producer, config_hash, model_body(state));
}

void load_model(ModelState& state, const std::string& path) {
  restore_params(state.parameters(), read_checkpoint(path), path);
}

GradcheckReport gradcheck_model(const TrainConfig& cfg, std::uint64_t seed, Index batch_size, Index vocab_size,
                                const GradcheckOptions& opt) {
  if (batch_size < 2) throw std::invalid_argument("gradcheck_model: batch needs both labels");
  if (vocab_size < 2) throw std::invalid_argument("gradcheck_model: vocabulary too small");
  std::mt19937_64 rng = make_rng(seed, 50);
  std::uniform_int_distribution<Index> size_dist(2, std::min<Index>(vocab_size, 5));
  std::uniform_real_distribution<double> value_dist(0.5, 1.5);
  std::vector<Index> ids(static_cast<std::size_t>(vocab_size));
  std::iota(ids.begin(), ids.end(), Index{0});
  std::vector<DataSample> samples(static_cast<std::size_t>(batch_size));
  for (std::size_t n = 0; n < samples.size(); ++n) {
    std::shuffle(ids.begin(), ids.end(), rng);
    const Index m = size_dist(rng);
    for (Index i = 0; i < m; ++i) samples[n].features.push_back({ids[static_cast<std::size_t>(i)], value_dist(rng)});
    samples[n].label = static_cast<int>(n % 2);
  }
  Batch batch;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    batch.samples.push_back(&samples[n]);
    batch.by_label[static_cast<std::size_t>(samples[n].label)].push_back(static_cast<Index>(n));
  }
  std::mt19937_64 init = make_rng(seed, 51);
  ModelState state = ModelState::create(vocab_size, cfg.model, init);
  // Biases start at zero, which puts empty edges exactly on the ReLU kink
  // where finite differences are meaningless; check at a generic point.
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (Parameter* p : {&state.gen.b1, &state.gen.b2, &state.net.b1, &state.net.b2, &state.net.readout_b}) {
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += jitter(init);
  }
  const LossBuilder loss = [&](Tape& tape) {
    std::mt19937_64 noise = make_rng(seed, 52);
    return total_loss(tape, batch, state, cfg, noise, Mode::Train).total;
  };
  return gradcheck(loss, state.parameters(), opt);
}

std::vector<Tensor> collect_eval_gates(ModelState& state, const TrainConfig& cfg, std::span<const DataSample> samples) {
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (const DataSample& s : samples) out.push_back(sample_eval_gates(state, cfg.model, cfg.flags, s));
  return out;
}

std::vector<VariantReport> ablate(std::span<const DataSample> train, std::span<const DataSample> val,
                                  std::span<const DataSample> test, Index vocab_size, const TrainConfig& base,
                                  const std::vector<AblationFlags>& variants) {
  std::vector<VariantReport> out;
  for (const AblationFlags& flags : variants) {
    TrainConfig cfg = base;
    cfg.flags = flags;
    Trainer trainer(cfg, vocab_size);
    FitResult fit = trainer.fit(train, val);
    VariantReport r{flags, evaluate(fit.best, cfg, test), OrderHistogram(cfg.gate_threshold), fit.best_epoch};
    for (const Tensor& g : collect_eval_gates(fit.best, cfg, test)) r.orders.add(g);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hirs

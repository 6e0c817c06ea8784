#include "hirs/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hirs {

void PlantedSpec::validate() const {
  if (m < 1) throw std::invalid_argument("planted spec: m must be >= 1");
  std::set<std::vector<Index>> seen;
  for (const PlantedInteraction& q : interactions) {
    if (q.members.size() < 2) throw std::invalid_argument("planted spec: interactions need order >= 2");
    for (std::size_t i = 0; i < q.members.size(); ++i) {
      if (q.members[i] < 0 || q.members[i] >= m) {
        throw std::invalid_argument("planted spec: feature " + std::to_string(q.members[i]) + " outside 0.." +
                                    std::to_string(m - 1));
      }
      if (i > 0 && q.members[i] <= q.members[i - 1]) {
        throw std::invalid_argument("planted spec: members must be distinct and sorted");
      }
    }
    if (!seen.insert(q.members).second) throw std::invalid_argument("planted spec: repeated interaction");
  }
  if (noise < 0) throw std::invalid_argument("planted spec: noise must be >= 0");
  if (users < 1) throw std::invalid_argument("planted spec: users must be >= 1");
}

PlantedSpec PlantedSpec::parse(std::istream& in) {
  PlantedSpec s;
  s.interactions.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    const auto fail = [&](const std::string& why) {
      throw DataError("planted spec", lineno, why);
    };
    if (key == "m:") {
      if (!(ls >> s.m)) fail("expected an integer after 'm:'");
    } else if (key == "noise:") {
      if (!(ls >> s.noise)) fail("expected a number after 'noise:'");
    } else if (key == "users:") {
      if (!(ls >> s.users)) fail("expected an integer after 'users:'");
    } else if (key == "interaction:") {
      std::string ids, tag;
      PlantedInteraction q;
      if (!(ls >> ids >> tag >> q.coeff) || tag != "coeff:") fail("expected 'interaction: i,j,... coeff: c'");
      for (const std::string& tok : split_fields(ids, ",")) {
        try {
          q.members.push_back(std::stoll(tok));
        } catch (const std::exception&) {
          fail("bad feature index '" + tok + "'");
        }
      }
      std::sort(q.members.begin(), q.members.end());
      s.interactions.push_back(std::move(q));
    } else {
      fail("unknown key '" + key + "' (expected m:, noise:, users:, interaction:)");
    }
  }
  s.validate();
  return s;
}

PlantedSpec PlantedSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open planted spec " + path);
  return parse(in);
}

std::string PlantedSpec::to_text() const {
  std::ostringstream out;
  out << "m: " << m << "\nnoise: " << noise << "\nusers: " << users << "\n";
  for (const PlantedInteraction& q : interactions) {
    out << "interaction: ";
    for (std::size_t i = 0; i < q.members.size(); ++i) out << (i ? "," : "") << q.members[i];
    out << " coeff: " << q.coeff << "\n";
  }
  return out.str();
}

PlantedSpec PlantedSpec::standard() {
  PlantedSpec s;
  s.m = 10;
  s.interactions = {{{0, 1}, 2.5}, {{2, 3, 4}, 2.5}, {{5, 6}, 2.5}};
  return s;
}

bool PlantedSpec::is_member(Index i) const {
  for (const PlantedInteraction& q : interactions) {
    if (std::find(q.members.begin(), q.members.end(), i) != q.members.end()) return true;
  }
  return false;
}

double PlantedSpec::logit(const std::vector<double>& x) const {
  double s = 0.0;
  for (const PlantedInteraction& q : interactions) {
    double prod = q.coeff;
    for (Index i : q.members) prod *= x[static_cast<std::size_t>(i)];
    s += prod;
  }
  return s;
}

Dataset generate(const PlantedSpec& spec, Index n_samples, std::mt19937_64& rng) {
  spec.validate();
  Dataset ds;
  for (Index i = 0; i < spec.m; ++i) ds.vocab.add("f" + std::to_string(i));
  ds.vocab.freeze();
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ds.samples.reserve(static_cast<std::size_t>(n_samples));
  std::vector<double> x(static_cast<std::size_t>(spec.m));
  for (Index n = 0; n < n_samples; ++n) {
    DataSample s;
    for (Index i = 0; i < spec.m; ++i) {
      x[static_cast<std::size_t>(i)] = coin(rng) ? 1.0 : -1.0;
      s.features.push_back({i, x[static_cast<std::size_t>(i)]});
    }
    double z = spec.logit(x);
    if (spec.noise > 0) z += spec.noise * noise(rng);
    s.label = unit(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
    s.user = n % spec.users;
    s.item = n;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

double membership_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
    }
  }
  return pairs > 0 ? wins / pairs : 0.5;
}

namespace {

struct GateStats {
  double auc = 0.0;
  std::vector<double> jaccard;
  std::vector<double> coactivation;
};

// Planted membership per feature id; ids equal positions in generated data.
GateStats gate_stats(const std::vector<Tensor>& gates, const std::vector<DataSample>& samples, const PlantedSpec& spec,
                     double threshold) {
  const auto m = static_cast<std::size_t>(spec.m);
  std::vector<double> activation(m, 0.0);
  std::vector<double> slots(m, 0.0);
  GateStats st;
  st.jaccard.assign(spec.interactions.size(), 0.0);
  st.coactivation.assign(spec.interactions.size(), 0.0);
  std::vector<Index> row_of(m);
  for (std::size_t n = 0; n < gates.size(); ++n) {
    const Tensor& g = gates[n];
    const DataSample& s = samples[n];
    std::fill(row_of.begin(), row_of.end(), Index{-1});
    for (Index r = 0; r < g.rows(); ++r) {
      const auto id = static_cast<std::size_t>(s.features[static_cast<std::size_t>(r)].id);
      row_of[id] = r;
      activation[id] += g.row(r).sum();
      slots[id] += static_cast<double>(g.cols());
    }
    for (std::size_t q = 0; q < spec.interactions.size(); ++q) {
      const auto& members = spec.interactions[q].members;
      double best = 0.0;
      for (Index j = 0; j < g.cols(); ++j) {
        double inter = 0.0;
        double active = 0.0;
        for (Index r = 0; r < g.rows(); ++r) {
          if (g(r, j) <= threshold) continue;
          active += 1.0;
          const Index id = s.features[static_cast<std::size_t>(r)].id;
          if (std::binary_search(members.begin(), members.end(), id)) inter += 1.0;
        }
        const double uni = active + static_cast<double>(members.size()) - inter;
        if (active > 0) best = std::max(best, inter / uni);
      }
      st.jaccard[q] += best;
      // Strongest joint activation of all members within one column.
      double co = 0.0;
      for (Index j = 0; j < g.cols(); ++j) {
        double prod = 1.0;
        for (Index id : members) prod *= row_of[static_cast<std::size_t>(id)] < 0 ? 0.0 : g(row_of[static_cast<std::size_t>(id)], j);
        co = std::max(co, prod);
      }
      st.coactivation[q] += co;
    }
  }
  std::vector<double> scores(m, 0.0);
  std::vector<bool> positive(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    scores[i] = slots[i] > 0 ? activation[i] / slots[i] : 0.0;
    positive[i] = spec.is_member(static_cast<Index>(i));
  }
  st.auc = membership_auc(scores, positive);
  for (double& j : st.jaccard) j /= std::max<double>(1.0, static_cast<double>(gates.size()));
  for (double& c : st.coactivation) c /= std::max<double>(1.0, static_cast<double>(gates.size()));
  return st;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

RecoveryReport recovery_score(const std::vector<Tensor>& gates, const std::vector<DataSample>& samples,
                              const PlantedSpec& spec, double threshold, std::mt19937_64& rng, int baseline_trials) {
  if (gates.size() > samples.size()) throw std::invalid_argument("recovery_score: more gate matrices than samples");
  RecoveryReport r;
  GateStats st = gate_stats(gates, samples, spec, threshold);
  r.auc = st.auc;
  r.jaccard = st.jaccard;
  r.mean_jaccard = mean_of(st.jaccard);
  r.coactivation = st.coactivation;

  double above = 0.0;
  double total = 0.0;
  OrderHistogram hist(threshold);
  for (const Tensor& g : gates) {
    above += static_cast<double>((g.array() > threshold).count());
    total += static_cast<double>(g.size());
    hist.add(g);
  }
  r.density = total > 0 ? above / total : 0.0;

  // Order distribution over nonempty edges vs the planted orders.
  std::vector<double> learned;
  const auto& counts = hist.counts();
  const double nonempty = static_cast<double>(hist.total()) - (counts.empty() ? 0.0 : static_cast<double>(counts[0]));
  std::vector<double> planted(static_cast<std::size_t>(spec.m) + 1, 0.0);
  for (const PlantedInteraction& q : spec.interactions) {
    planted[q.members.size()] += 1.0 / static_cast<double>(spec.interactions.size());
  }
  double tv = 0.0;
  for (std::size_t o = 1; o < planted.size(); ++o) {
    const double p = nonempty > 0 && o < counts.size() ? static_cast<double>(counts[o]) / nonempty : 0.0;
    tv += std::abs(p - planted[o]);
  }
  r.order_distance = nonempty > 0 ? 0.5 * tv : 1.0;

  std::bernoulli_distribution on(std::clamp(r.density, 0.0, 1.0));
  std::vector<double> aucs;
  std::vector<double> jacs;
  std::vector<Tensor> fake(gates.size());
  for (int t = 0; t < baseline_trials; ++t) {
    for (std::size_t n = 0; n < gates.size(); ++n) {
      fake[n].resize(gates[n].rows(), gates[n].cols());
      for (Index i = 0; i < fake[n].size(); ++i) fake[n].data()[i] = on(rng) ? 1.0 : 0.0;
    }
    GateStats fs = gate_stats(fake, samples, spec, threshold);
    aucs.push_back(fs.auc);
    jacs.push_back(mean_of(fs.jaccard));
  }
  r.random_auc = mean_of(aucs);
  double var = 0.0;
  for (double a : aucs) var += (a - r.random_auc) * (a - r.random_auc);
  r.random_auc_sd = aucs.size() > 1 ? std::sqrt(var / static_cast<double>(aucs.size() - 1)) : 0.0;
  r.random_jaccard = mean_of(jacs);
  return r;
}

std::string RecoveryReport::to_json() const {
  nlohmann::ordered_json j;
  j["auc"] = auc;
  j["random_auc"] = random_auc;
  j["random_auc_sd"] = random_auc_sd;
  j["jaccard"] = jaccard;
  j["mean_jaccard"] = mean_jaccard;
  j["random_jaccard"] = random_jaccard;
  j["coactivation"] = coactivation;
  j["order_distance"] = order_distance;
  j["density"] = density;
  return j.dump();
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double VariantSummary::median_accuracy() const { return median(accuracy); }
double VariantSummary::median_order0() const { return median(order0); }
double VariantSummary::median_mean_order() const { return median(mean_order); }
double VariantSummary::median_extreme_mass(Index m) const {
  std::vector<double> v;
  for (const auto& f : order_fractions) {
    double mass = f.empty() ? 0.0 : f[0];
    for (std::size_t o = static_cast<std::size_t>(std::max<Index>(1, m - 2)); o < f.size(); ++o) mass += f[o];
    v.push_back(mass);
  }
  return median(v);
}

double VariantSummary::median_auc_gain() const {
  std::vector<double> g;
  for (const RecoveryReport& r : recovery) g.push_back(r.auc - r.random_auc);
  return median(g);
}

const VariantSummary& AblationSuiteReport::variant(const std::string& name) const {
  for (const VariantSummary& v : variants) {
    if (v.flags.name() == name) return v;
  }
  throw std::out_of_range("no variant named " + name);
}

bool AblationSuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const DirectionCheck& c) { return c.passed || !c.gating; });
}

std::string AblationSuiteReport::to_json() const {
  nlohmann::ordered_json j;
  j["seconds"] = seconds;
  for (const VariantSummary& v : variants) {
    nlohmann::ordered_json e;
    e["accuracy"] = v.accuracy;
    e["median_accuracy"] = v.median_accuracy();
    e["recall10"] = v.recall10;
    e["order0"] = v.order0;
    e["mean_order"] = v.mean_order;
    e["order_fractions"] = v.order_fractions;
    nlohmann::ordered_json rec = nlohmann::ordered_json::array();
    for (const RecoveryReport& r : v.recovery) rec.push_back(nlohmann::ordered_json::parse(r.to_json()));
    e["recovery"] = rec;
    j["variants"][v.flags.name()] = e;
  }
  for (const DirectionCheck& c : checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"gating", c.gating}, {"detail", c.detail}});
  }
  j["passed"] = passed();
  return j.dump(2);
}

std::vector<AblationFlags> standard_variants() {
  const auto f = [](const char* s) { return AblationFlags::parse(s); };
  return {f("full"), f("no_mi"), f("no_l0"), f("no_hp"), f("no_nm"), f("no_hp+no_nm")};
}

AblationSuiteReport ablation_suite(const SynthBenchConfig& cfg, std::ostream* progress) {
  const auto start = std::chrono::steady_clock::now();
  AblationSuiteReport rep;
  for (const AblationFlags& f : standard_variants()) rep.variants.push_back(VariantSummary{f, {}, {}, {}, {}, {}, {}});

  for (std::uint64_t seed : cfg.seeds) {
    std::mt19937_64 data_rng = make_rng(seed, 100);
    Dataset ds = generate(cfg.spec, cfg.n_samples, data_rng);
    std::mt19937_64 split_rng = make_rng(seed, 101);
    SplitSets sets = split(ds.samples, cfg.split, split_rng);
    const std::size_t n_rec = std::min(sets.test.size(), static_cast<std::size_t>(cfg.recovery_samples));
    const std::vector<DataSample> rec_samples(sets.test.begin(), sets.test.begin() + static_cast<std::ptrdiff_t>(n_rec));

    for (VariantSummary& v : rep.variants) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      tc.flags = v.flags;
      Trainer trainer(tc, ds.vocab.size());
      FitResult fit = trainer.fit(sets.train, sets.val);
      EvalResult test = evaluate(fit.best, tc, sets.test);
      OrderHistogram hist(tc.gate_threshold);
      for (const Tensor& g : collect_eval_gates(fit.best, tc, sets.test)) hist.add(g);
      std::mt19937_64 rec_rng = make_rng(seed, 102);
      v.accuracy.push_back(test.accuracy);
      v.recall10.push_back(test.ranking.recall_at(10));
      v.order0.push_back(hist.fraction(0));
      v.mean_order.push_back(hist.mean_order());
      v.order_fractions.push_back(hist.fractions());
      v.recovery.push_back(recovery_score(collect_eval_gates(fit.best, tc, rec_samples), rec_samples, cfg.spec,
                                          tc.gate_threshold, rec_rng));
      if (progress) {
        *progress << "seed " << seed << " " << v.flags.name() << ": acc=" << test.accuracy
                  << " order0=" << hist.fraction(0) << " mean_order=" << hist.mean_order()
                  << " auc=" << v.recovery.back().auc << " best_epoch=" << fit.best_epoch << "\n";
        progress->flush();
      }
    }
  }

  const VariantSummary& full = rep.variant("full");
  const auto fmt = [](double a, double b) {
    std::ostringstream s;
    s << a << " vs " << b;
    return s.str();
  };
  for (const char* name : {"no_mi", "no_l0", "no_hp", "no_nm"}) {
    const VariantSummary& v = rep.variant(name);
    rep.checks.push_back({std::string("full >= ") + name, full.median_accuracy() >= v.median_accuracy() - 0.005,
                          fmt(full.median_accuracy(), v.median_accuracy())});
  }
  const VariantSummary& both = rep.variant("no_hp+no_nm");
  bool worst = true;
  for (const VariantSummary& v : rep.variants) {
    if (&v != &both && !(both.median_accuracy() < v.median_accuracy())) worst = false;
  }
  rep.checks.push_back({"no_hp+no_nm strictly worst", worst, "median accuracy " + std::to_string(both.median_accuracy())});
  const VariantSummary& no_mi = rep.variant("no_mi");
  rep.checks.push_back({"no_mi order-0 fraction > full", no_mi.median_order0() > full.median_order0(),
                        fmt(no_mi.median_order0(), full.median_order0())});
  const VariantSummary& no_l0 = rep.variant("no_l0");
  rep.checks.push_back({"no_l0 mean order > full", no_l0.median_mean_order() > full.median_mean_order(),
                        fmt(no_l0.median_mean_order(), full.median_mean_order())});
  rep.checks.push_back({"full recovery AUC >= random + 0.2", full.median_auc_gain() >= 0.2,
                        "gain " + std::to_string(full.median_auc_gain())});
  // Empty plus near-complete edges: the degenerate shapes expected without the MI terms. Reported only.
  const Index m = cfg.spec.m;
  rep.checks.push_back({"no_mi order-0 + order>=m-2 mass > full",
                        no_mi.median_extreme_mass(m) > full.median_extreme_mass(m),
                        fmt(no_mi.median_extreme_mass(m), full.median_extreme_mass(m)), false});
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

double fit_single_edge(const Prop2Config& cfg, bool nonlinear) {
  std::mt19937_64 data_rng = make_rng(cfg.seed, 200);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto make = [&](Index n) {
    std::vector<DataSample> out(static_cast<std::size_t>(n));
    for (DataSample& s : out) s.features = {{0, unit(data_rng)}, {1, unit(data_rng)}};
    return out;
  };
  const std::vector<DataSample> train = make(cfg.n_train);
  const std::vector<DataSample> test = make(cfg.n_test);
  const auto target = [](const DataSample& s) { return s.features[0].value * s.features[1].value; };

  std::mt19937_64 init_rng = make_rng(cfg.seed, 201);
  IhgnnParams params = IhgnnParams::init(2, cfg.dim, cfg.hidden, 0.5, init_rng);
  AdamOptions ao;
  ao.lr = cfg.lr;
  Adam opt(params.parameters(), ao);

  const auto run = [&](Tape& tape, std::span<const DataSample* const> batch) {
    NodeBatch nodes = NodeBatch::from(batch);
    Var gates = tape.constant(Tensor::Ones(nodes.seg.total(), 1));
    Var h = edge_representations(tape, nodes, gates, params, nonlinear);
    std::vector<double> y;
    for (const DataSample* s : batch) y.push_back(target(*s));
    return mse(graph_readout(tape, gates, h, nodes.seg, params).logits, y);
  };

  std::mt19937_64 order_rng = make_rng(cfg.seed, 202);
  std::vector<const DataSample*> ptrs;
  for (const DataSample& s : train) ptrs.push_back(&s);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(ptrs.begin(), ptrs.end(), order_rng);
    for (std::size_t b = 0; b < ptrs.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(ptrs.size(), b + static_cast<std::size_t>(cfg.batch_size));
      opt.zero_grad();
      Tape tape;
      Var loss = run(tape, std::span<const DataSample* const>(ptrs.data() + b, end - b));
      tape.backward(loss);
      opt.step();
    }
  }
  std::vector<const DataSample*> test_ptrs;
  for (const DataSample& s : test) test_ptrs.push_back(&s);
  Tape tape;
  return run(tape, test_ptrs).scalar();
}

Prop2Result prop2_check(const Prop2Config& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Prop2Result r;
  r.mse_nonlinear = fit_single_edge(cfg, true);
  r.mse_linear = fit_single_edge(cfg, false);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace hirs

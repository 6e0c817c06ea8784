// Command-line driver: one subcommand per pipeline stage.

#include "hirs/config.hpp"
#include "hirs/data.hpp"
#include "hirs/scaling.hpp"
#include "hirs/synth.hpp"
#include "hirs/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace hirs;
using json = nlohmann::ordered_json;

namespace {

struct Run {
  std::string command;
  RunConfig cfg;
  fs::path dir;

  std::string hash() const { return cfg.hash(); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  std::string text_header() const { return "# producer=" + command + " config_hash=" + hash() + "\n"; }

  json report() const {
    json j;
    j["producer"] = command;
    j["config_hash"] = hash();
    return j;
  }

  void write(const std::string& name, const std::string& body) const {
    std::ofstream out(path(name));
    if (!out) throw std::runtime_error("cannot write " + path(name));
    out << body;
  }
};

// Extra "--key value" / "--key=value" arguments become config overrides.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
    arg = arg.substr(2);
    std::string value;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
      value = arg.substr(eq + 1);
      arg = arg.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for --" + arg);
      value = extras[++i];
    }
    for (char& c : arg) c = c == '-' ? '_' : c;
    cfg.set(arg, value);
  }
}

fs::path make_out_dir(const std::string& command, const RunConfig& cfg) {
  fs::path root = cfg.get("out_dir").empty() ? fs::path("runs") : fs::path(cfg.get("out_dir"));
  if (const char* env = std::getenv("HIRS_OUT_DIR"); env && *env) root = env;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&now));
  const std::string base = command + "-" + stamp + "-" + cfg.hash();
  fs::path dir = root / base;
  for (int i = 1; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

Dataset load_data(const Run& run) {
  const RunConfig& c = run.cfg;
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed"));
  if (!c.get("dataset").empty()) return load_dataset(c.get("dataset"));
  if (!c.get("ratings").empty()) {
    std::map<std::string, std::string> kv;
    for (const std::string& key : SchemaConfig::keys()) kv[key] = c.get(key);
    const SchemaConfig schema = SchemaConfig::from_map(kv);
    RawInteractions raw = load_interactions(c.get("ratings"), c.get("user_features"), c.get("item_features"), schema);
    std::mt19937_64 rng = make_rng(seed, 4);
    NegativeSamplingReport report;
    Dataset ds = build_implicit_dataset(std::move(raw), schema, rng, &report);
    if (report.replacement_users > 0) {
      std::cerr << "note: " << report.replacement_users << " users had negatives drawn with replacement\n";
    }
    save_dataset(ds, run.path("dataset.hirsdata"), run.command, run.hash());
    return ds;
  }
  if (!c.get("synth_spec").empty()) {
    std::mt19937_64 rng = make_rng(seed, 100);
    return generate(PlantedSpec::load(c.get("synth_spec")), c.get_int("n_samples"), rng);
  }
  throw ConfigError("no data: set one of dataset, ratings or synth_spec");
}

SplitSets split_data(const Run& run, const Dataset& ds) {
  const std::vector<double> r = run.cfg.get_doubles("split");
  if (r.size() != 3) throw ConfigError("split must have three ratios, e.g. 0.7,0.15,0.15");
  std::mt19937_64 rng = make_rng(static_cast<std::uint64_t>(run.cfg.get_int("seed")), 3);
  return split(ds.samples, {r[0], r[1], r[2]}, rng);
}

json metrics_json(const EvalResult& e) {
  json j = json::parse(e.ranking.to_json());
  j["accuracy"] = e.accuracy;
  return j;
}

int cmd_train(const Run& run) {
  const TrainConfig tc = TrainConfig::from(run.cfg);
  const Dataset ds = load_data(run);
  const SplitSets sets = split_data(run, ds);
  Trainer trainer(tc, ds.vocab.size());
  std::ofstream log_file(run.path("metrics.jsonl"));
  std::ofstream timing(run.path("timing.jsonl"));
  timing << artifact_header(run.command, run.hash()) << "\n";
  MetricsLog log(log_file, run.command, run.hash(), tc.log_wall_time);
  FitResult fit = trainer.fit(sets.train, sets.val, &log, &timing);
  trainer.save_checkpoint(run.path("checkpoint.bin"), run.command, run.hash());
  save_model(fit.best, run.path("best.bin"), run.command, run.hash());

  json summary = run.report();
  summary["best_epoch"] = fit.best_epoch;
  summary["select_by"] = tc.select_by;
  summary["test"] = metrics_json(evaluate(fit.best, tc, sets.test));
  run.write("summary.json", summary.dump(2) + "\n");
  std::cout << "best epoch " << fit.best_epoch << "; test " << summary["test"].dump() << "\n";
  return 0;
}

ModelState load_state(const Run& run, const Dataset& ds, const TrainConfig& tc) {
  const std::string ckpt = run.cfg.get("checkpoint");
  if (ckpt.empty()) throw ConfigError("checkpoint is required (set --checkpoint <path>)");
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt);
  std::mt19937_64 init = make_rng(tc.seed, 0);
  ModelState state = ModelState::create(ds.vocab.size(), tc.model, init);
  load_model(state, ckpt);
  return state;
}

int cmd_evaluate(const Run& run) {
  const TrainConfig tc = TrainConfig::from(run.cfg);
  const std::string ckpt = run.cfg.get("checkpoint");
  if (ckpt.empty() || !fs::exists(ckpt)) throw ConfigError("evaluate needs an existing checkpoint (got '" + ckpt + "')");
  const Dataset ds = load_data(run);
  const SplitSets sets = split_data(run, ds);
  ModelState state = load_state(run, ds, tc);
  json j = run.report();
  j["checkpoint"] = ckpt;
  j["test"] = metrics_json(evaluate(state, tc, sets.test));
  OrderHistogram hist(tc.gate_threshold);
  for (const Tensor& g : collect_eval_gates(state, tc, sets.test)) hist.add(g);
  j["orders"] = json::parse(hist.to_json());
  run.write("eval.json", j.dump(2) + "\n");
  std::cout << j["test"].dump() << "\n";
  return 0;
}

std::vector<AblationFlags> ablation_variants(const RunConfig& cfg) {
  const std::vector<std::string> names = cfg.get_strings("flags");
  if (names.empty() || (names.size() == 1 && names[0] == "full")) return standard_variants();
  std::vector<AblationFlags> out{AblationFlags{}};
  for (const std::string& n : names) {
    AblationFlags f = AblationFlags::parse(n);
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  return out;
}

int cmd_ablate(const Run& run) {
  RunConfig base_cfg = run.cfg;
  base_cfg.set("flags", "full");
  const TrainConfig tc = TrainConfig::from(base_cfg);
  const Dataset ds = load_data(run);
  const SplitSets sets = split_data(run, ds);
  const std::vector<VariantReport> reps =
      ablate(sets.train, sets.val, sets.test, ds.vocab.size(), tc, ablation_variants(run.cfg));
  json j = run.report();
  const EvalResult& full = reps.front().test;
  for (const VariantReport& r : reps) {
    json v;
    v["test"] = metrics_json(r.test);
    v["delta_vs_full"] = {{"accuracy", r.test.accuracy - full.accuracy},
                          {"recall@10", r.test.ranking.recall_at(10) - full.ranking.recall_at(10)},
                          {"ndcg@10", r.test.ranking.ndcg_at(10) - full.ranking.ndcg_at(10)}};
    v["orders"] = json::parse(r.orders.to_json());
    v["best_epoch"] = r.best_epoch;
    j["variants"][r.flags.name()] = v;
    std::cout << r.flags.name() << ": accuracy " << r.test.accuracy << ", recall@10 " << r.test.ranking.recall_at(10)
              << ", order-0 fraction " << r.orders.fraction(0) << ", mean order " << r.orders.mean_order() << "\n";
  }
  run.write("ablate.json", j.dump(2) + "\n");
  return 0;
}

int cmd_dump(const Run& run) {
  const TrainConfig tc = TrainConfig::from(run.cfg);
  const Dataset ds = load_data(run);
  const SplitSets sets = split_data(run, ds);
  ModelState state = load_state(run, ds, tc);
  const auto first = static_cast<std::size_t>(run.cfg.get_int("sample_index"));
  const auto count = static_cast<std::size_t>(run.cfg.get_int("dump_count"));
  if (first >= sets.test.size()) throw ConfigError("sample_index beyond the test split (" + std::to_string(sets.test.size()) + " samples)");
  std::ostringstream out;
  out << run.text_header();
  for (std::size_t i = first; i < std::min(sets.test.size(), first + count); ++i) {
    const DataSample& s = sets.test[i];
    out << "\n# test sample " << i << " label=" << s.label << " user=" << s.user << " item=" << s.item << "\n";
    out << dump_incidence(s, sample_eval_gates(state, tc.model, tc.flags, s), ds.vocab, tc.gate_threshold);
  }
  run.write("interactions.txt", out.str());
  std::cout << out.str();
  return 0;
}

int cmd_synth_gen(const Run& run) {
  const PlantedSpec spec =
      run.cfg.get("synth_spec").empty() ? PlantedSpec::standard() : PlantedSpec::load(run.cfg.get("synth_spec"));
  std::mt19937_64 rng = make_rng(static_cast<std::uint64_t>(run.cfg.get_int("seed")), 100);
  const Dataset ds = generate(spec, run.cfg.get_int("n_samples"), rng);
  save_dataset(ds, run.path("synth.hirsdata"), run.command, run.hash());
  run.write("planted.txt", run.text_header() + spec.to_text());
  std::cout << "wrote " << ds.samples.size() << " samples to " << run.path("synth.hirsdata") << "\n";
  return 0;
}

int cmd_synth_bench(const Run& run) {
  SynthBenchConfig sc;
  if (!run.cfg.get("synth_spec").empty()) sc.spec = PlantedSpec::load(run.cfg.get("synth_spec"));
  RunConfig base_cfg = run.cfg;
  base_cfg.set("flags", "full");
  sc.train = TrainConfig::from(base_cfg);
  sc.n_samples = run.cfg.get_int("n_samples");
  sc.recovery_samples = run.cfg.get_int("recovery_samples");
  sc.seeds.clear();
  for (long long i = 0; i < run.cfg.get_int("seeds"); ++i) sc.seeds.push_back(sc.train.seed + static_cast<std::uint64_t>(i));
  const std::vector<double> r = run.cfg.get_doubles("split");
  if (r.size() != 3) throw ConfigError("split must have three ratios");
  sc.split = {r[0], r[1], r[2]};

  const AblationSuiteReport rep = ablation_suite(sc, &std::cout);
  Prop2Config pc;
  pc.seed = sc.train.seed;
  pc.epochs = static_cast<int>(run.cfg.get_int("prop2_epochs"));
  const Prop2Result prop2 = prop2_check(pc);

  json j = run.report();
  j["planted"] = sc.spec.to_text();
  j["suite"] = json::parse(rep.to_json());
  j["prop2"] = {{"mse_nonlinear", prop2.mse_nonlinear}, {"mse_linear", prop2.mse_linear}, {"passed", prop2.passed()}};
  run.write("synthbench.json", j.dump(2) + "\n");
  const bool ok = prop2.passed() && rep.passed();
  for (const DirectionCheck& c : rep.checks) {
    std::cout << (c.passed ? "ok   " : c.gating ? "FAIL " : "note ") << c.name << " (" << c.detail << ")\n";
  }
  std::cout << (prop2.passed() ? "ok   " : "FAIL ") << "prop2 nonlinear " << prop2.mse_nonlinear << " linear "
            << prop2.mse_linear << "\n";
  if (!ok) {
    std::cerr << "synth-bench: expected orderings violated; see " << run.path("synthbench.json") << "\n";
    return 3;
  }
  return 0;
}

int cmd_gradcheck(const Run& run) {
  TrainConfig tc = TrainConfig::from(run.cfg);
  tc.model.dim = run.cfg.get_int("gradcheck_dim");
  tc.model.k = run.cfg.get_int("gradcheck_k");
  tc.model.hidden = run.cfg.get_int("gradcheck_hidden");
  GradcheckOptions opt;
  opt.tolerance = run.cfg.get_double("gradcheck_tol");
  json j = run.report();
  double worst = 0.0;
  bool ok = true;
  for (long long i = 0; i < run.cfg.get_int("gradcheck_seeds"); ++i) {
    const std::uint64_t seed = tc.seed + static_cast<std::uint64_t>(i);
    const GradcheckReport r = gradcheck_model(tc, seed, run.cfg.get_int("gradcheck_batch"), 8, opt);
    j["seeds"].push_back({{"seed", seed}, {"max_rel_error", r.max_rel_error}, {"passed", r.passed}, {"worst", r.summary()}});
    worst = std::max(worst, r.max_rel_error);
    ok = ok && r.passed;
  }
  j["max_rel_error"] = worst;
  j["tolerance"] = opt.tolerance;
  j["passed"] = ok;
  run.write("gradcheck.json", j.dump(2) + "\n");
  std::cout << "gradcheck max rel. error " << worst << " -> " << (ok ? "pass" : "FAIL") << " at " << opt.tolerance << "\n";
  return ok ? 0 : 3;
}

int cmd_bench_scaling(const Run& run) {
  ScalingConfig sc;
  sc.train = TrainConfig::from(run.cfg);
  sc.ks.clear();
  for (double k : run.cfg.get_doubles("k_list")) sc.ks.push_back(static_cast<Index>(k));
  sc.ms.clear();
  for (double m : run.cfg.get_doubles("m_list")) sc.ms.push_back(static_cast<Index>(m));
  sc.samples = run.cfg.get_int("bench_samples");
  sc.repeats = static_cast<int>(run.cfg.get_int("bench_repeats"));
  const ScalingReport rep = scaling_bench(sc);
  const std::string csv = rep.to_csv(run.command, run.hash());
  run.write("scaling.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypergraph interaction recommender: training, evaluation and benchmarks"};
  app.require_subcommand(1);
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Run&);
  };
  const std::vector<Cmd> cmds{
      {"train", "train a model and write metrics, checkpoints and a test summary", cmd_train},
      {"evaluate", "score a checkpoint on the test split", cmd_evaluate},
      {"ablate", "train ablation variants (--flags no_mi,no_l0,...) and compare", cmd_ablate},
      {"dump-interactions", "print thresholded incidence matrices of test samples", cmd_dump},
      {"synth-gen", "generate a planted-interaction dataset", cmd_synth_gen},
      {"synth-bench", "ablation suite, recovery scores and the single-edge interaction check", cmd_synth_bench},
      {"gradcheck", "finite-difference check of the full training loss", cmd_gradcheck},
      {"bench-scaling", "epoch time over k and m; writes k,m,seconds CSV", cmd_bench_scaling},
  };
  std::string config_path;
  std::vector<CLI::App*> subs;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "flat key=value config file");
    sub->allow_extras();
    subs.push_back(sub);
  }
  app.footer("Any config key can be overridden with --key value. Output goes to $HIRS_OUT_DIR (or out_dir, or ./runs).");
  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      Run run;
      run.command = cmds[i].name;
      if (!config_path.empty()) run.cfg = RunConfig::load(config_path);
      apply_overrides(run.cfg, subs[i]->remaining());
      run.dir = make_out_dir(run.command, run.cfg);
      run.write("config.txt", run.text_header() + run.cfg.canonical());
      std::cerr << "output: " << run.dir.string() << "\n";
      return cmds[i].fn(run);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

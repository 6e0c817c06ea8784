#include "hirs/scaling.hpp"

#include "hirs/synth.hpp"

#include <chrono>
#include <sstream>

namespace hirs {

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

double ScalingReport::seconds(Index k, Index m) const {
  for (const ScalingRow& r : rows) {
    if (r.k == k && r.m == m) return r.seconds;
  }
  throw std::out_of_range("no timing for k=" + std::to_string(k) + " m=" + std::to_string(m));
}

std::string ScalingReport::to_csv(const std::string& producer, const std::string& config_hash) const {
  std::ostringstream out;
  out << "# producer=" << producer << " config_hash=" << config_hash << " slope_k=" << slope_k
      << " slope_m=" << slope_m << "\n";
  out << "k,m,seconds\n";
  for (const ScalingRow& r : rows) out << r.k << "," << r.m << "," << r.seconds << "\n";
  return out.str();
}

ScalingReport scaling_bench(const ScalingConfig& cfg) {
  if (cfg.ks.empty() || cfg.ms.empty()) throw std::invalid_argument("scaling_bench: empty k or m list");
  if (cfg.repeats < 1) throw std::invalid_argument("scaling_bench: repeats must be >= 1");
  ScalingReport rep;
  for (Index m : cfg.ms) {
    PlantedSpec spec;
    spec.m = m;
    if (m >= 2) spec.interactions = {{{0, 1}, 2.5}};
    std::mt19937_64 data_rng = make_rng(cfg.train.seed, 300);
    const Dataset ds = generate(spec, cfg.samples, data_rng);
    for (Index k : cfg.ks) {
      TrainConfig tc = cfg.train;
      tc.model.k = k;
      tc.epochs = 1;
      std::vector<double> times;
      for (int r = 0; r < cfg.repeats; ++r) {
        Trainer trainer(tc, ds.vocab.size());
        const auto start = std::chrono::steady_clock::now();
        trainer.run_epoch(ds.samples);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      }
      rep.rows.push_back({k, m, median(times)});
    }
  }
  std::vector<double> xk, yk, xm, ym;
  for (const ScalingRow& r : rep.rows) {
    if (r.m == cfg.ms.front()) {
      xk.push_back(static_cast<double>(r.k));
      yk.push_back(r.seconds);
    }
    if (r.k == cfg.ks.front()) {
      xm.push_back(static_cast<double>(r.m));
      ym.push_back(r.seconds);
    }
  }
  rep.slope_k = least_squares_slope(xk, yk);
  rep.slope_m = least_squares_slope(xm, ym);
  return rep;
}

}  // namespace hirs

#pragma once

#include "hirs/trainer.hpp"

#include <array>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace hirs {

struct PlantedInteraction {
  std::vector<Index> members;  // feature positions, sorted
  double coeff = 1.0;
};

/// Synthetic task: m sign-valued features, label logit = sum_q c_q * prod_{i in q} x_i + noise.
struct PlantedSpec {
  Index m = 10;
  std::vector<PlantedInteraction> interactions;
  double noise = 0.0;  // std of Gaussian noise added to the logit
  std::int64_t users = 200;

  /// Throws on repeated or out-of-range sets and sets of order < 2.
  void validate() const;
  /// Lines "m: 10", "noise: 0.5", "users: 200", "interaction: 2,5,7 coeff: 3.0"; '#' comments.
  static PlantedSpec parse(std::istream& in);
  static PlantedSpec load(const std::string& path);
  std::string to_text() const;
  /// 10 features with planted {0,1}, {2,3,4} and {5,6}; 7..9 are noise.
  static PlantedSpec standard();

  /// True if feature position i belongs to some planted set.
  bool is_member(Index i) const;
  double logit(const std::vector<double>& x) const;
};

/// Samples carry feature ids 0..m-1 ("f0".."f<m-1>") in order with values in {-1, +1}.
Dataset generate(const PlantedSpec& spec, Index n_samples, std::mt19937_64& rng);

struct RecoveryReport {
  double auc = 0.0;                   // membership vs mean gate activation
  std::vector<double> jaccard;        // per planted set, best-matching column, averaged over samples
  double mean_jaccard = 0.0;
  std::vector<double> coactivation;   // per planted set, best column's product of member gates, averaged
  double order_distance = 0.0;        // total variation vs the planted order distribution
  double density = 0.0;               // fraction of gates above threshold
  double random_auc = 0.0;            // matched-density random-gate baseline (Monte-Carlo mean)
  double random_auc_sd = 0.0;
  double random_jaccard = 0.0;

  std::string to_json() const;
};

/// Scores gates (one m x k matrix per sample of `samples`) against the plant.
/// The random baseline draws Bernoulli(density) gates of the same shapes.
RecoveryReport recovery_score(const std::vector<Tensor>& gates, const std::vector<DataSample>& samples,
                              const PlantedSpec& spec, double threshold, std::mt19937_64& rng,
                              int baseline_trials = 200);

/// Mann-Whitney AUC of scores for positives vs negatives, ties counted half.
double membership_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

struct SynthBenchConfig {
  PlantedSpec spec = PlantedSpec::standard();
  Index n_samples = 20000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::array<double, 3> split{0.7, 0.15, 0.15};
  TrainConfig train;
  Index recovery_samples = 500;
};

struct VariantSummary {
  AblationFlags flags;
  std::vector<double> accuracy;  // per seed, test set
  std::vector<double> recall10;
  std::vector<double> order0;
  std::vector<double> mean_order;
  std::vector<RecoveryReport> recovery;
  std::vector<std::vector<double>> order_fractions;

  double median_accuracy() const;
  double median_order0() const;
  double median_mean_order() const;
  double median_auc_gain() const;  // auc - random_auc
  /// Gate-order mass at order 0 plus orders >= m - 2.
  double median_extreme_mass(Index m) const;
};

struct DirectionCheck {
  std::string name;
  bool passed = false;
  std::string detail;
  /// Non-gating checks are reported but do not affect passed().
  bool gating = true;
};

struct AblationSuiteReport {
  std::vector<VariantSummary> variants;
  std::vector<DirectionCheck> checks;
  double seconds = 0.0;

  const VariantSummary& variant(const std::string& name) const;
  bool passed() const;
  std::string to_json() const;
};

/// The six variants: full, no_mi, no_l0, no_hp, no_nm, no_hp+no_nm.
std::vector<AblationFlags> standard_variants();

/// Trains every variant on every seed's generated data and checks the
/// expected orderings on median test accuracy and gate statistics.
AblationSuiteReport ablation_suite(const SynthBenchConfig& cfg, std::ostream* progress = nullptr);

double median(std::vector<double> v);

struct Prop2Config {
  Index n_train = 2000;
  Index n_test = 10000;
  Index dim = 16;
  Index hidden = 64;
  Index batch_size = 64;
  int epochs = 150;
  double lr = 0.005;
  std::uint64_t seed = 1;
};

struct Prop2Result {
  double mse_nonlinear = 0.0;
  double mse_linear = 0.0;
  double seconds = 0.0;
  bool passed() const { return mse_nonlinear < 0.01 && mse_linear > 0.1; }
};

/// Fits y = x_a * x_b (x ~ U(-1, 1)) through one fixed hyperedge over both
/// nodes, once with the ReLU edge model and once with the linear one.
Prop2Result prop2_check(const Prop2Config& cfg);

/// Test MSE of the single-hyperedge regressor.
double fit_single_edge(const Prop2Config& cfg, bool nonlinear);

}  // namespace hirs

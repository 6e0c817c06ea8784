#pragma once

#include "hirs/adam.hpp"
#include "hirs/config.hpp"
#include "hirs/gradcheck.hpp"
#include "hirs/metrics.hpp"
#include "hirs/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hirs {

struct TrainConfig {
  ModelConfig model;
  double lambda1 = 0.02;  // L0 penalty
  double lambda2 = 1.0;   // s-Infomax
  double lambda3 = 0.1;   // Infomin
  double dropout = 0.1;   // on Infomin inputs
  double lr = 1e-3;
  Index batch_size = 256;
  int epochs = 10;
  std::uint64_t seed = 1;
  AblationFlags flags;
  int eval_every = 1;
  /// Validation metric used to keep the best state: recall10, ndcg10 or accuracy.
  std::string select_by = "recall10";
  bool detach_graph_reprs = false;
  /// Write measured epoch seconds into the metrics log (breaks byte-identical logs).
  bool log_wall_time = false;
  double gate_threshold = 0.5;

  void validate() const;
  static TrainConfig from(const RunConfig& rc);

  // Weights after the ablation switches are applied.
  double l0_weight() const { return flags.no_l0 || flags.no_hp ? 0.0 : lambda1; }
  double smax_weight() const { return flags.no_mi ? 0.0 : lambda2; }
  double min_weight() const { return flags.no_mi ? 0.0 : lambda3; }
};

/// Scalar objective plus its weighted parts; bce + l0 + smax + min == total.
struct LossTerms {
  Var total;
  double bce = 0.0;
  double l0 = 0.0;
  double smax = 0.0;
  double min = 0.0;
  /// The batch had a single label, so s-Infomax had no pairs.
  bool single_label = false;
};

/// Mean BCE + l0_weight * (L0 sum / B) + smax_weight * s-Infomax + min_weight * Infomin.
/// All randomness (gate noise, pairs, dropout) comes from `rng`. A non-finite
/// component raises NonFiniteError naming it.
LossTerms total_loss(Tape& tape, const Batch& batch, ModelState& state, const TrainConfig& cfg,
                     std::mt19937_64& rng, Mode mode = Mode::Train);

struct EvalResult {
  RankingMetrics ranking;
  double accuracy = 0.0;
  std::vector<double> probs;
};

EvalResult evaluate(ModelState& state, const TrainConfig& cfg, std::span<const DataSample> samples);

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_bce = 0.0;
  double loss_l0 = 0.0;
  double loss_smax = 0.0;
  double loss_min = 0.0;
  std::optional<double> recall10;
  std::optional<double> ndcg10;
  std::optional<double> accuracy;
  double seconds = 0.0;
  std::size_t single_label_batches = 0;
};

/// JSON-lines metrics log: a header object, then one object per epoch.
class MetricsLog {
 public:
  MetricsLog(std::ostream& out, const std::string& producer, const std::string& config_hash, bool wall_time);
  void write(const EpochRecord& r);

 private:
  std::ostream& out_;
  bool wall_time_;
};

/// Header object shared by every JSON artifact.
std::string artifact_header(const std::string& producer, const std::string& config_hash);

inline constexpr const char* kCheckpointMagic = "HIRSCKPT1";

struct FitResult {
  std::vector<EpochRecord> epochs;
  ModelState best;
  int best_epoch = 0;
  double best_score = 0.0;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, Index vocab_size);
  // The optimizer holds pointers into state_.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// One pass over stratified batches of `train`; returns loss means.
  EpochRecord run_epoch(std::span<const DataSample> train);
  /// Runs the remaining epochs, evaluating on `val` every eval_every epochs
  /// and keeping the best state by cfg.select_by (ties keep the later epoch).
  FitResult fit(std::span<const DataSample> train, std::span<const DataSample> val, MetricsLog* log = nullptr,
                std::ostream* timing = nullptr);

  void save_checkpoint(const std::string& path, const std::string& producer, const std::string& config_hash) const;
  /// Restores parameters, Adam moments, epoch and rng streams. Shapes must match.
  void load_checkpoint(const std::string& path);

  ModelState& state() { return state_; }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }

 private:
  TrainConfig cfg_;
  std::mt19937_64 data_rng_;
  std::mt19937_64 noise_rng_;
  ModelState state_;
  Adam opt_;
  int epoch_ = 0;
};

/// Writes only a ModelState (no optimizer) in checkpoint format.
void save_model(const ModelState& state, const std::string& path, const std::string& producer,
                const std::string& config_hash);
/// Loads parameters from any checkpoint into a state of matching shapes.
void load_model(ModelState& state, const std::string& path);

/// Seeded stream `stream` derived from `seed`; distinct streams are independent.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

struct VariantReport {
  AblationFlags flags;
  EvalResult test;
  OrderHistogram orders;
  int best_epoch = 0;
};

/// Trains each variant with identical seed and budget and evaluates on `test`.
std::vector<VariantReport> ablate(std::span<const DataSample> train, std::span<const DataSample> val,
                                  std::span<const DataSample> test, Index vocab_size, const TrainConfig& base,
                                  const std::vector<AblationFlags>& variants);

/// Gradcheck of total_loss (gate noise, pairs and dropout frozen by reseeding)
/// on a random ragged batch with both labels, for the model sizes in `cfg`.
GradcheckReport gradcheck_model(const TrainConfig& cfg, std::uint64_t seed, Index batch_size, Index vocab_size,
                                const GradcheckOptions& opt = {});

/// Eval-mode gates of each sample.
std::vector<Tensor> collect_eval_gates(ModelState& state, const TrainConfig& cfg, std::span<const DataSample> samples);

}  // namespace hirs

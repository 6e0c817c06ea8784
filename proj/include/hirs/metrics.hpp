#pragma once

#include "hirs/data.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hirs {

struct ScoredItem {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double score = 0.0;
  int relevance = 0;
};

/// One user's candidates, scores descending, ties by ascending item id.
struct UserRanking {
  std::int64_t user = 0;
  std::vector<ScoredItem> items;
  Index relevant() const;
};

std::vector<UserRanking> rank_by_user(std::span<const ScoredItem> items);

struct RankingMetrics {
  std::vector<int> ks;
  std::vector<double> recall;  // parallel to ks
  std::vector<double> ndcg;
  std::size_t users = 0;          // users with >= 1 relevant item
  std::size_t skipped_users = 0;  // users with none; excluded from the means

  double recall_at(int k) const;
  double ndcg_at(int k) const;
  std::string to_json() const;
};

/// Recall@K and NDCG@K (binary gain, 1/log2(rank+1) discount) averaged over
/// users, each ranked over their own candidates.
RankingMetrics rank_metrics(std::span<const ScoredItem> items, const std::vector<int>& ks = {10, 20});

/// Pairs eval-mode probabilities with their samples' user/item/label.
std::vector<ScoredItem> score_items(std::span<const DataSample> samples, const std::vector<double>& probs);

/// Fraction of samples whose thresholded probability equals the label.
double accuracy(std::span<const DataSample> samples, const std::vector<double>& probs, double threshold = 0.5);

/// Counts of hyperedge orders; order = entries above the threshold in a column.
class OrderHistogram {
 public:
  explicit OrderHistogram(double threshold = 0.5) : threshold_(threshold) {}

  /// Adds every column of an m x k gate matrix.
  void add(const Tensor& gates);
  void add_order(Index order, std::size_t count = 1);

  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t total() const { return total_; }
  std::vector<double> fractions() const;
  double fraction(Index order) const;
  double mean_order() const;
  double threshold() const { return threshold_; }
  std::string to_json() const;

 private:
  double threshold_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

/// Orders of each column of a gate matrix.
std::vector<Index> column_orders(const Tensor& gates, double threshold = 0.5);

/// Thresholded incidence grid: one row per feature (labeled by name), one
/// column per nonempty hyperedge, columns sorted by ascending order.
std::string dump_incidence(const DataSample& sample, const Tensor& gates, const FeatureVocab& vocab,
                           double threshold = 0.5);

}  // namespace hirs

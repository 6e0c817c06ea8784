#include "hirs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace hirs {

Index UserRanking::relevant() const {
  Index n = 0;
  for (const ScoredItem& it : items) n += it.relevance != 0;
  return n;
}

std::vector<UserRanking> rank_by_user(std::span<const ScoredItem> items) {
  std::map<std::int64_t, UserRanking> by_user;
  for (const ScoredItem& it : items) {
    UserRanking& r = by_user[it.user];
    r.user = it.user;
    r.items.push_back(it);
  }
  std::vector<UserRanking> out;
  out.reserve(by_user.size());
  for (auto& [user, r] : by_user) {
    std::stable_sort(r.items.begin(), r.items.end(), [](const ScoredItem& a, const ScoredItem& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.item < b.item;
    });
    out.push_back(std::move(r));
  }
  return out;
}

double RankingMetrics::recall_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw std::out_of_range("recall@" + std::to_string(k) + " was not computed");
}

double RankingMetrics::ndcg_at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return ndcg[i];
  }
  throw std::out_of_range("ndcg@" + std::to_string(k) + " was not computed");
}

std::string RankingMetrics::to_json() const {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    j["recall@" + std::to_string(ks[i])] = recall[i];
    j["ndcg@" + std::to_string(ks[i])] = ndcg[i];
  }
  j["users"] = users;
  j["skipped_users"] = skipped_users;
  return j.dump();
}

RankingMetrics rank_metrics(std::span<const ScoredItem> items, const std::vector<int>& ks) {
  RankingMetrics m;
  m.ks = ks;
  m.recall.assign(ks.size(), 0.0);
  m.ndcg.assign(ks.size(), 0.0);
  for (const UserRanking& r : rank_by_user(items)) {
    const Index rel = r.relevant();
    if (rel == 0) {
      ++m.skipped_users;
      continue;
    }
    ++m.users;
    for (std::size_t q = 0; q < ks.size(); ++q) {
      const Index k = ks[q];
      double hits = 0.0;
      double dcg = 0.0;
      double idcg = 0.0;
      const Index top = std::min<Index>(k, static_cast<Index>(r.items.size()));
      for (Index pos = 0; pos < top; ++pos) {
        if (r.items[static_cast<std::size_t>(pos)].relevance != 0) {
          hits += 1.0;
          dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
        }
      }
      for (Index pos = 0; pos < std::min(k, rel); ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
      m.recall[q] += hits / static_cast<double>(rel);
      m.ndcg[q] += dcg / idcg;
    }
  }
  if (m.users > 0) {
    for (std::size_t q = 0; q < ks.size(); ++q) {
      m.recall[q] /= static_cast<double>(m.users);
      m.ndcg[q] /= static_cast<double>(m.users);
    }
  }
  return m;
}

std::vector<ScoredItem> score_items(std::span<const DataSample> samples, const std::vector<double>& probs) {
  if (probs.size() != samples.size()) throw std::invalid_argument("score_items: one score per sample required");
  std::vector<ScoredItem> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i] = {samples[i].user, samples[i].item, probs[i], samples[i].label};
  }
  return out;
}

double accuracy(std::span<const DataSample> samples, const std::vector<double>& probs, double threshold) {
  if (probs.size() != samples.size()) throw std::invalid_argument("accuracy: one score per sample required");
  if (samples.empty()) return 0.0;
  std::size_t right = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) right += (probs[i] > threshold ? 1 : 0) == samples[i].label;
  return static_cast<double>(right) / static_cast<double>(samples.size());
}

std::vector<Index> column_orders(const Tensor& gates, double threshold) {
  std::vector<Index> out(static_cast<std::size_t>(gates.cols()));
  for (Index j = 0; j < gates.cols(); ++j) out[static_cast<std::size_t>(j)] = (gates.col(j).array() > threshold).count();
  return out;
}

void OrderHistogram::add_order(Index order, std::size_t count) {
  const auto o = static_cast<std::size_t>(order);
  if (counts_.size() <= o) counts_.resize(o + 1, 0);
  counts_[o] += count;
  total_ += count;
}

void OrderHistogram::add(const Tensor& gates) {
  if (counts_.size() <= static_cast<std::size_t>(gates.rows())) counts_.resize(static_cast<std::size_t>(gates.rows()) + 1, 0);
  for (Index o : column_orders(gates, threshold_)) add_order(o);
}

std::vector<double> OrderHistogram::fractions() const {
  std::vector<double> out(counts_.size(), 0.0);
  if (total_ == 0) return out;
  for (std::size_t i = 0; i < counts_.size(); ++i) out[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  return out;
}

double OrderHistogram::fraction(Index order) const {
  const auto o = static_cast<std::size_t>(order);
  if (total_ == 0 || o >= counts_.size()) return 0.0;
  return static_cast<double>(counts_[o]) / static_cast<double>(total_);
}

double OrderHistogram::mean_order() const {
  if (total_ == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) s += static_cast<double>(i) * static_cast<double>(counts_[i]);
  return s / static_cast<double>(total_);
}

std::string OrderHistogram::to_json() const {
  nlohmann::ordered_json j;
  j["threshold"] = threshold_;
  j["counts"] = counts_;
  j["fractions"] = fractions();
  j["mean_order"] = mean_order();
  return j.dump();
}

std::string dump_incidence(const DataSample& sample, const Tensor& gates, const FeatureVocab& vocab,
                           double threshold) {
  if (gates.rows() != sample.size()) {
    throw ShapeError("dump_incidence: gate rows (" + std::to_string(gates.rows()) + ") != sample features (" +
                     std::to_string(sample.size()) + ")");
  }
  const std::vector<Index> orders = column_orders(gates, threshold);
  std::vector<Index> cols;
  for (Index j = 0; j < gates.cols(); ++j) {
    if (orders[static_cast<std::size_t>(j)] > 0) cols.push_back(j);
  }
  std::stable_sort(cols.begin(), cols.end(), [&](Index a, Index b) {
    return orders[static_cast<std::size_t>(a)] < orders[static_cast<std::size_t>(b)];
  });

  std::size_t width = 7;
  for (const Feature& f : sample.features) width = std::max(width, vocab.name(f.id).size());
  std::ostringstream out;
  out << std::string(width, ' ');
  for (Index j : cols) out << " e" << j;
  out << "\n";
  out << std::string(width, ' ');
  for (Index j : cols) {
    const std::string tag = std::to_string(orders[static_cast<std::size_t>(j)]);
    out << " " << std::string(std::to_string(j).size() + 1 - tag.size(), ' ') << tag;
  }
  out << "  <- order\n";
  for (Index i = 0; i < sample.size(); ++i) {
    const std::string& name = vocab.name(sample.features[static_cast<std::size_t>(i)].id);
    out << name << std::string(width - name.size(), ' ');
    for (Index j : cols) {
      out << " " << std::string(std::to_string(j).size(), ' ') << (gates(i, j) > threshold ? '1' : '0');
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hirs

#pragma once

#include "hirs/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hirs {

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

/// Bijection between feature names and dense ids 0..size-1.
class FeatureVocab {
 public:
  /// Returns the id of `name`, adding it if unseen. Throws once frozen.
  Index add(const std::string& name);
  /// Throws DataError for unknown names.
  Index id(const std::string& name) const;
  bool contains(const std::string& name) const { return ids_.count(name) != 0; }
  const std::string& name(Index id) const { return names_.at(static_cast<std::size_t>(id)); }
  Index size() const { return static_cast<Index>(names_.size()); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

 private:
  std::unordered_map<std::string, Index> ids_;
  std::vector<std::string> names_;
  bool frozen_ = false;
};

struct Feature {
  Index id = 0;
  double value = 1.0;

  bool operator==(const Feature&) const = default;
};

/// One hypergraph node set plus its binary label.
struct DataSample {
  std::vector<Feature> features;
  int label = 0;
  std::int64_t user = -1;
  /// Item id, kept for deterministic tie-breaking when ranking; -1 if unknown.
  std::int64_t item = -1;

  Index size() const { return static_cast<Index>(features.size()); }
  bool operator==(const DataSample&) const = default;
};

/// Throws DataError if ids repeat, the label is not 0/1, the sample is empty,
/// or an id falls outside the vocabulary.
void validate_sample(const DataSample& s, Index vocab_size);

struct Dataset {
  FeatureVocab vocab;
  std::vector<DataSample> samples;
};

enum class ImplicitMode { Threshold, AllRated };

/// Column layout of the raw input files.
struct SchemaConfig {
  std::string separator = "::";
  std::string list_separator = "|";
  std::vector<std::string> rating_columns{"user", "item", "rating", "timestamp"};
  std::vector<std::string> user_feature_columns;
  std::vector<std::string> item_feature_columns;
  double rating_threshold = 3.0;
  ImplicitMode implicit_mode = ImplicitMode::Threshold;

  static const std::vector<std::string>& keys();
  /// Recognized keys: see keys(). Unknown keys raise DataError.
  static SchemaConfig from_map(const std::map<std::string, std::string>& kv);
};

struct RawRecord {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double rating = 0.0;
};

/// Parsed ratings plus per-entity feature lists; the vocabulary grows while loading.
struct RawInteractions {
  FeatureVocab vocab;
  std::vector<RawRecord> records;
  std::unordered_map<std::int64_t, std::vector<Index>> user_features;
  std::unordered_map<std::int64_t, std::vector<Index>> item_features;
  std::size_t dropped_missing_join = 0;

  std::vector<Index> features_for(std::int64_t user, std::int64_t item) const;
};

/// Reads a delimited ratings file and optional user/item feature files. Each
/// entity also gets an id feature ("user=<id>", "item=<id>"). When a feature
/// file is given, records whose key is absent from it are dropped and counted.
RawInteractions load_interactions(const std::string& ratings_path, const std::string& user_features_path,
                                  const std::string& item_features_path, const SchemaConfig& schema);

/// Positive samples: rating > threshold, or every rated row in AllRated mode.
std::vector<DataSample> to_implicit(const RawInteractions& raw, const SchemaConfig& schema);

struct NegativeSamplingReport {
  std::size_t replacement_users = 0;
};

/// For each user, draws as many negatives as that user has positives, uniformly
/// without replacement from items the user never rated. Falls back to drawing
/// with replacement (and counts it) when that pool is too small.
std::vector<DataSample> sample_negatives(const std::vector<DataSample>& positives, const RawInteractions& raw,
                                         std::mt19937_64& rng, NegativeSamplingReport* report = nullptr);

/// Positives and sampled negatives with a frozen vocabulary.
Dataset build_implicit_dataset(RawInteractions raw, const SchemaConfig& schema, std::mt19937_64& rng,
                               NegativeSamplingReport* report = nullptr);

struct SplitSets {
  std::vector<DataSample> train;
  std::vector<DataSample> val;
  std::vector<DataSample> test;
};

/// Uniform random split at sample granularity. Ratios must sum to 1.
SplitSets split(const std::vector<DataSample>& samples, std::array<double, 3> ratios, std::mt19937_64& rng);

struct Batch {
  std::vector<const DataSample*> samples;
  /// Indices into `samples`, by label.
  std::array<std::vector<Index>, 2> by_label;
  bool single_label = false;

  Index size() const { return static_cast<Index>(samples.size()); }
};

/// Shuffled batches. With `stratify`, each batch takes one sample of each
/// label first whenever both labels still remain.
std::vector<Batch> make_batches(std::span<const DataSample> set, Index batch_size, bool stratify, std::mt19937_64& rng);

inline constexpr const char* kDatasetMagic = "HIRSDATA1";

/// Line-oriented cache: magic line, producer/hash comment, vocabulary, samples.
void save_dataset(const Dataset& ds, const std::string& path, const std::string& producer = "",
                  const std::string& config_hash = "");
Dataset load_dataset(const std::string& path);

std::vector<std::string> split_fields(const std::string& line, const std::string& sep);

}  // namespace hirs

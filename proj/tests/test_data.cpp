#include "hirs/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

using namespace hirs;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("hirs_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& body) const {
    const fs::path p = path_ / name;
    std::ofstream(p) << body;
    return p.string();
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

// Three users, four items; user 1 rates items 10, 11 high and 12 low.
const char* kRatings =
    "1::10::5::0\n"
    "1::11::4::0\n"
    "1::12::2::0\n"
    "2::10::5::0\n"
    "3::13::1::0\n";

}  // namespace

TEST(Vocab, AddLookupAndFreeze) {
  FeatureVocab v;
  EXPECT_EQ(v.add("a"), 0);
  EXPECT_EQ(v.add("b"), 1);
  EXPECT_EQ(v.add("a"), 0);
  EXPECT_EQ(v.id("b"), 1);
  EXPECT_EQ(v.name(1), "b");
  EXPECT_THROW(v.id("zzz"), DataError);
  v.freeze();
  EXPECT_EQ(v.add("a"), 0);
  EXPECT_THROW(v.add("c"), DataError);
}

TEST(Samples, ValidationRejectsBadSamples) {
  DataSample ok{{{0, 1.0}, {2, 1.0}}, 1};
  EXPECT_NO_THROW(validate_sample(ok, 3));
  DataSample dup{{{0, 1.0}, {0, 1.0}}, 1};
  EXPECT_THROW(validate_sample(dup, 3), DataError);
  DataSample empty{{}, 0};
  EXPECT_THROW(validate_sample(empty, 3), DataError);
  DataSample bad_label{{{0, 1.0}}, 2};
  EXPECT_THROW(validate_sample(bad_label, 3), DataError);
  DataSample out_of_range{{{5, 1.0}}, 0};
  EXPECT_THROW(validate_sample(out_of_range, 3), DataError);
}

TEST(Schema, UnknownKeyListsValidOnes) {
  try {
    SchemaConfig::from_map({{"seperator", ","}});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("seperator"), std::string::npos);
    EXPECT_NE(msg.find("list_separator"), std::string::npos);
  }
  const SchemaConfig s = SchemaConfig::from_map({{"separator", "\\t"}, {"rating_threshold", "4"}});
  EXPECT_EQ(s.separator, "\t");
  EXPECT_DOUBLE_EQ(s.rating_threshold, 4.0);
}

TEST(Ingest, RatingsOnlyGivesIdFeatures) {
  TempDir dir;
  const RawInteractions raw = load_interactions(dir.file("r.dat", kRatings), "", "", SchemaConfig{});
  EXPECT_EQ(raw.records.size(), 5u);
  EXPECT_TRUE(raw.vocab.contains("user=1"));
  EXPECT_TRUE(raw.vocab.contains("item=13"));
  EXPECT_EQ(raw.features_for(1, 10).size(), 2u);
}

TEST(Ingest, FeatureFilesAddColumnsAndDropMissingJoins) {
  TempDir dir;
  SchemaConfig schema;
  schema.user_feature_columns = {"gender", "age"};
  schema.item_feature_columns = {"genre"};
  const std::string users = dir.file("u.dat", "1::M::25\n2::F::35\n");  // user 3 missing
  const std::string items = dir.file("i.dat", "10::Comedy|Drama\n11::Drama\n12::Action\n13::Horror\n");
  const RawInteractions raw = load_interactions(dir.file("r.dat", kRatings), users, items, schema);
  EXPECT_EQ(raw.dropped_missing_join, 1u);
  EXPECT_EQ(raw.records.size(), 4u);
  EXPECT_TRUE(raw.vocab.contains("gender=M"));
  EXPECT_TRUE(raw.vocab.contains("genre=Comedy"));
  EXPECT_TRUE(raw.vocab.contains("genre=Drama"));
  // user id + gender + age + item id + two genres
  EXPECT_EQ(raw.features_for(1, 10).size(), 6u);
}

TEST(Ingest, ErrorsCarryLineNumbers) {
  TempDir dir;
  const std::string bad = dir.file("r.dat", "1::10::5::0\n1::x::4::0\n");
  try {
    load_interactions(bad, "", "", SchemaConfig{});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_interactions(dir.path("missing.dat"), "", "", SchemaConfig{}), DataError);
}

TEST(Implicit, ThresholdAndAllRated) {
  TempDir dir;
  const RawInteractions raw = load_interactions(dir.file("r.dat", kRatings), "", "", SchemaConfig{});
  SchemaConfig schema;
  const auto pos = to_implicit(raw, schema);
  EXPECT_EQ(pos.size(), 3u);  // ratings 5, 4, 5 exceed 3
  for (const DataSample& s : pos) EXPECT_EQ(s.label, 1);
  schema.implicit_mode = ImplicitMode::AllRated;
  EXPECT_EQ(to_implicit(raw, schema).size(), 5u);
}

TEST(Negatives, OnePerPositiveFromUnratedItems) {
  TempDir dir;
  const RawInteractions raw = load_interactions(dir.file("r.dat", kRatings), "", "", SchemaConfig{});
  const auto pos = to_implicit(raw, SchemaConfig{});
  std::mt19937_64 rng(1);
  NegativeSamplingReport report;
  const auto neg = sample_negatives(pos, raw, rng, &report);
  ASSERT_EQ(neg.size(), pos.size());
  for (const DataSample& s : neg) {
    EXPECT_EQ(s.label, 0);
    // User 1 rated 10, 11, 12: its only unrated item is 13.
    if (s.user == 1) EXPECT_EQ(s.item, 13);
    if (s.user == 2) EXPECT_NE(s.item, 10);
  }
  // User 1 has two positives but only one unrated item.
  EXPECT_EQ(report.replacement_users, 1u);
}

TEST(Negatives, WithoutReplacementWhenPoolSuffices) {
  std::string ratings;
  for (int item = 0; item < 50; ++item) ratings += "9::" + std::to_string(item) + "::" + (item < 5 ? "5" : "1") + "::0\n";
  ratings += "8::100::5::0\n";
  for (int item = 101; item < 120; ++item) ratings += "8::" + std::to_string(item) + "::1::0\n";
  TempDir dir;
  const RawInteractions raw = load_interactions(dir.file("r.dat", ratings), "", "", SchemaConfig{});
  const auto pos = to_implicit(raw, SchemaConfig{});
  std::mt19937_64 rng(2);
  NegativeSamplingReport report;
  const auto neg = sample_negatives(pos, raw, rng, &report);
  EXPECT_EQ(report.replacement_users, 0u);
  std::set<std::int64_t> items9;
  for (const DataSample& s : neg) {
    if (s.user == 9) {
      EXPECT_GE(s.item, 100);  // user 9 rated every item below 50
      items9.insert(s.item);
    }
  }
  EXPECT_EQ(items9.size(), 5u);
}

TEST(Implicit, DatasetIsBalancedAndFrozen) {
  TempDir dir;
  std::mt19937_64 rng(3);
  const Dataset ds =
      build_implicit_dataset(load_interactions(dir.file("r.dat", kRatings), "", "", SchemaConfig{}), SchemaConfig{}, rng);
  EXPECT_TRUE(ds.vocab.frozen());
  const auto positives = std::count_if(ds.samples.begin(), ds.samples.end(), [](const DataSample& s) { return s.label == 1; });
  EXPECT_EQ(static_cast<std::size_t>(positives) * 2, ds.samples.size());
  for (const DataSample& s : ds.samples) EXPECT_NO_THROW(validate_sample(s, ds.vocab.size()));
}

namespace {

std::vector<DataSample> numbered(int n) {
  std::vector<DataSample> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)].features = {{0, 1.0}};
    out[static_cast<std::size_t>(i)].label = i % 3 == 0 ? 1 : 0;
    out[static_cast<std::size_t>(i)].item = i;
  }
  return out;
}

}  // namespace

TEST(Split, PartitionsAndIsSeeded) {
  const auto all = numbered(1000);
  std::mt19937_64 a(7), b(7);
  const SplitSets s1 = split(all, {0.7, 0.15, 0.15}, a);
  const SplitSets s2 = split(all, {0.7, 0.15, 0.15}, b);
  EXPECT_EQ(s1.train.size() + s1.val.size() + s1.test.size(), all.size());
  EXPECT_EQ(s1.train.size(), 700u);
  EXPECT_EQ(s1.train, s2.train);
  EXPECT_EQ(s1.test, s2.test);
  std::set<std::int64_t> seen;
  for (const auto* part : {&s1.train, &s1.val, &s1.test}) {
    for (const DataSample& s : *part) EXPECT_TRUE(seen.insert(s.item).second);
  }
  std::mt19937_64 c(7);
  EXPECT_THROW(split(all, {0.5, 0.1, 0.1}, c), std::invalid_argument);
}

TEST(Batches, StratifiedBatchesHoldBothLabels) {
  const auto all = numbered(100);
  std::mt19937_64 rng(8);
  const auto batches = make_batches(all, 16, true, rng);
  std::size_t total = 0;
  for (const Batch& b : batches) {
    total += b.samples.size();
    EXPECT_LE(b.size(), 16);
    EXPECT_FALSE(b.single_label);
    EXPECT_FALSE(b.by_label[0].empty());
    EXPECT_FALSE(b.by_label[1].empty());
    EXPECT_EQ(b.by_label[0].size() + b.by_label[1].size(), b.samples.size());
  }
  EXPECT_EQ(total, all.size());
}

TEST(Batches, SingleLabelBatchesAreFlagged) {
  auto all = numbered(10);
  for (DataSample& s : all) s.label = 1;
  std::mt19937_64 rng(9);
  for (const Batch& b : make_batches(all, 4, true, rng)) EXPECT_TRUE(b.single_label);
}

TEST(Cache, RoundTripPreservesEverything) {
  TempDir dir;
  std::mt19937_64 rng(10);
  const Dataset ds =
      build_implicit_dataset(load_interactions(dir.file("r.dat", kRatings), "", "", SchemaConfig{}), SchemaConfig{}, rng);
  save_dataset(ds, dir.path("c.hirsdata"), "test", "abc");
  const Dataset back = load_dataset(dir.path("c.hirsdata"));
  EXPECT_EQ(back.samples, ds.samples);
  ASSERT_EQ(back.vocab.size(), ds.vocab.size());
  for (Index i = 0; i < ds.vocab.size(); ++i) EXPECT_EQ(back.vocab.name(i), ds.vocab.name(i));
  std::ifstream in(dir.path("c.hirsdata"));
  std::string magic;
  std::getline(in, magic);
  EXPECT_EQ(magic, kDatasetMagic);
  EXPECT_THROW(load_dataset(dir.file("bad.hirsdata", "NOPE\n")), DataError);
}

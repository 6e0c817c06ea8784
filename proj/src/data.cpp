#include "hirs/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace hirs {

Index FeatureVocab::add(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  if (frozen_) throw DataError("feature vocabulary is frozen; unseen feature '" + name + "'");
  const Index id = size();
  ids_.emplace(name, id);
  names_.push_back(name);
  return id;
}

Index FeatureVocab::id(const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) throw DataError("unknown feature '" + name + "'");
  return it->second;
}

void validate_sample(const DataSample& s, Index vocab_size) {
  if (s.features.empty()) throw DataError("sample with no features (empty hypergraph)");
  if (s.label != 0 && s.label != 1) throw DataError("label must be 0 or 1, got " + std::to_string(s.label));
  std::set<Index> seen;
  for (const Feature& f : s.features) {
    if (f.id < 0 || f.id >= vocab_size) throw DataError("feature id " + std::to_string(f.id) + " outside vocabulary");
    if (!seen.insert(f.id).second) throw DataError("duplicate feature id " + std::to_string(f.id) + " in sample");
  }
}

std::vector<std::string> split_fields(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  if (sep.empty()) {
    out.push_back(line);
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return out;
}

namespace {

std::string trim_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::int64_t parse_int(const std::string& s, const std::string& file, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(file, line, std::string("cannot parse ") + what + " '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& file, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(file, line, std::string("cannot parse ") + what + " '" + s + "'");
  }
}

void load_entity_features(const std::string& path, const std::string& kind, const std::vector<std::string>& columns,
                          const SchemaConfig& schema, FeatureVocab& vocab,
                          std::unordered_map<std::int64_t, std::vector<Index>>& out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + kind + " feature file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line, schema.separator);
    const std::int64_t id = parse_int(fields[0], path, lineno, "entity id");
    std::vector<Index> feats{vocab.add(kind + "=" + fields[0])};
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string col = c - 1 < columns.size() ? columns[c - 1] : kind + "_c" + std::to_string(c);
      for (const std::string& tok : split_fields(fields[c], schema.list_separator)) {
        if (tok.empty()) continue;
        const Index f = vocab.add(col + "=" + tok);
        if (std::find(feats.begin(), feats.end(), f) == feats.end()) feats.push_back(f);
      }
    }
    out[id] = std::move(feats);
  }
}

}  // namespace

const std::vector<std::string>& SchemaConfig::keys() {
  static const std::vector<std::string> k{"separator",           "list_separator",      "rating_columns",
                                          "user_feature_columns", "item_feature_columns", "rating_threshold",
                                          "implicit_mode"};
  return k;
}

SchemaConfig SchemaConfig::from_map(const std::map<std::string, std::string>& kv) {
  SchemaConfig s;
  for (const auto& [key, value] : kv) {
    if (key == "separator") {
      s.separator = value == "\\t" ? "\t" : value;
    } else if (key == "list_separator") {
      s.list_separator = value;
    } else if (key == "rating_columns") {
      s.rating_columns = split_list(value);
    } else if (key == "user_feature_columns") {
      s.user_feature_columns = split_list(value);
    } else if (key == "item_feature_columns") {
      s.item_feature_columns = split_list(value);
    } else if (key == "rating_threshold") {
      s.rating_threshold = std::stod(value);
    } else if (key == "implicit_mode") {
      if (value == "threshold") {
        s.implicit_mode = ImplicitMode::Threshold;
      } else if (value == "all_rated") {
        s.implicit_mode = ImplicitMode::AllRated;
      } else {
        throw DataError("implicit_mode must be threshold|all_rated, got '" + value + "'");
      }
    } else {
      std::string valid;
      for (const auto& k : keys()) valid += " " + k;
      throw DataError("unknown schema key '" + key + "'; valid keys:" + valid);
    }
  }
  return s;
}

std::vector<Index> RawInteractions::features_for(std::int64_t user, std::int64_t item) const {
  std::vector<Index> out = user_features.at(user);
  for (Index f : item_features.at(item)) {
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  return out;
}

RawInteractions load_interactions(const std::string& ratings_path, const std::string& user_features_path,
                                  const std::string& item_features_path, const SchemaConfig& schema) {
  RawInteractions raw;
  const auto col = [&](const char* name) -> std::size_t {
    auto it = std::find(schema.rating_columns.begin(), schema.rating_columns.end(), name);
    if (it == schema.rating_columns.end()) throw DataError(std::string("rating_columns lacks '") + name + "'");
    return static_cast<std::size_t>(it - schema.rating_columns.begin());
  };
  const std::size_t cu = col("user"), ci = col("item"), cr = col("rating");
  const std::size_t needed = std::max({cu, ci, cr}) + 1;

  if (!user_features_path.empty()) {
    load_entity_features(user_features_path, "user", schema.user_feature_columns, schema, raw.vocab,
                         raw.user_features);
  }
  if (!item_features_path.empty()) {
    load_entity_features(item_features_path, "item", schema.item_feature_columns, schema, raw.vocab,
                         raw.item_features);
  }

  std::ifstream in(ratings_path);
  if (!in) throw DataError("cannot open ratings file " + ratings_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, schema.separator);
    if (fields.size() < needed) {
      throw DataError(ratings_path, lineno,
                      "expected at least " + std::to_string(needed) + " columns, found " + std::to_string(fields.size()));
    }
    RawRecord r;
    r.user = parse_int(fields[cu], ratings_path, lineno, "user");
    r.item = parse_int(fields[ci], ratings_path, lineno, "item");
    r.rating = parse_double(fields[cr], ratings_path, lineno, "rating");

    if (user_features_path.empty()) {
      if (!raw.user_features.count(r.user)) raw.user_features[r.user] = {raw.vocab.add("user=" + std::to_string(r.user))};
    } else if (!raw.user_features.count(r.user)) {
      ++raw.dropped_missing_join;
      continue;
    }
    if (item_features_path.empty()) {
      if (!raw.item_features.count(r.item)) raw.item_features[r.item] = {raw.vocab.add("item=" + std::to_string(r.item))};
    } else if (!raw.item_features.count(r.item)) {
      ++raw.dropped_missing_join;
      continue;
    }
    raw.records.push_back(r);
  }
  return raw;
}

namespace {

DataSample make_sample(const RawInteractions& raw, std::int64_t user, std::int64_t item, int label) {
  DataSample s;
  s.user = user;
  s.item = item;
  s.label = label;
  for (Index f : raw.features_for(user, item)) s.features.push_back({f, 1.0});
  return s;
}

}  // namespace

std::vector<DataSample> to_implicit(const RawInteractions& raw, const SchemaConfig& schema) {
  std::vector<DataSample> out;
  for (const RawRecord& r : raw.records) {
    const bool positive = schema.implicit_mode == ImplicitMode::AllRated || r.rating > schema.rating_threshold;
    if (positive) out.push_back(make_sample(raw, r.user, r.item, 1));
  }
  return out;
}

std::vector<DataSample> sample_negatives(const std::vector<DataSample>& positives, const RawInteractions& raw,
                                         std::mt19937_64& rng, NegativeSamplingReport* report) {
  std::map<std::int64_t, std::size_t> pos_count;
  for (const DataSample& s : positives) ++pos_count[s.user];

  std::map<std::int64_t, std::set<std::int64_t>> rated;
  for (const RawRecord& r : raw.records) rated[r.user].insert(r.item);

  std::vector<std::int64_t> pool;
  pool.reserve(raw.item_features.size());
  for (const auto& [item, feats] : raw.item_features) pool.push_back(item);
  std::sort(pool.begin(), pool.end());
  if (pool.empty()) return {};

  std::vector<DataSample> out;
  for (const auto& [user, count] : pos_count) {
    const auto& seen = rated[user];
    std::vector<std::int64_t> unrated;
    for (std::int64_t item : pool) {
      if (!seen.count(item)) unrated.push_back(item);
    }
    if (unrated.size() >= count) {
      // Partial Fisher-Yates: first `count` entries become a uniform sample without replacement.
      for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, unrated.size() - 1);
        std::swap(unrated[i], unrated[pick(rng)]);
        out.push_back(make_sample(raw, user, unrated[i], 0));
      }
    } else {
      if (report) ++report->replacement_users;
      const auto& source = unrated.empty() ? pool : unrated;
      std::uniform_int_distribution<std::size_t> pick(0, source.size() - 1);
      for (std::size_t i = 0; i < count; ++i) out.push_back(make_sample(raw, user, source[pick(rng)], 0));
    }
  }
  return out;
}

Dataset build_implicit_dataset(RawInteractions raw, const SchemaConfig& schema, std::mt19937_64& rng,
                               NegativeSamplingReport* report) {
  Dataset ds;
  ds.samples = to_implicit(raw, schema);
  auto negatives = sample_negatives(ds.samples, raw, rng, report);
  ds.samples.insert(ds.samples.end(), std::make_move_iterator(negatives.begin()),
                    std::make_move_iterator(negatives.end()));
  ds.vocab = std::move(raw.vocab);
  ds.vocab.freeze();
  return ds;
}

SplitSets split(const std::vector<DataSample>& samples, std::array<double, 3> ratios, std::mt19937_64& rng) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(samples.size());
  const auto n_train = std::min(samples.size(), static_cast<std::size_t>(std::llround(n * ratios[0])));
  const auto n_val = std::min(samples.size() - n_train, static_cast<std::size_t>(std::llround(n * ratios[1])));

  SplitSets out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const DataSample& s = samples[order[i]];
    if (i < n_train) {
      out.train.push_back(s);
    } else if (i < n_train + n_val) {
      out.val.push_back(s);
    } else {
      out.test.push_back(s);
    }
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const DataSample> set, Index batch_size, bool stratify,
                                std::mt19937_64& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (stratify && batch_size < 2) throw std::invalid_argument("stratified batches need batch size >= 2");

  std::vector<Batch> out;
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto finish = [&](Batch& b) {
    for (Index i = 0; i < b.size(); ++i) b.by_label[static_cast<std::size_t>(b.samples[i]->label)].push_back(i);
    b.single_label = b.by_label[0].empty() || b.by_label[1].empty();
    out.push_back(std::move(b));
  };

  if (!stratify) {
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      Batch b;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      for (std::size_t i = start; i < end; ++i) b.samples.push_back(&set[order[i]]);
      finish(b);
    }
    return out;
  }

  std::array<std::vector<std::size_t>, 2> queues;
  for (std::size_t i : order) queues[static_cast<std::size_t>(set[i].label)].push_back(i);
  std::array<std::size_t, 2> head{0, 0};
  const auto remaining = [&](int l) { return queues[l].size() - head[l]; };
  while (remaining(0) + remaining(1) > 0) {
    Batch b;
    if (remaining(0) > 0 && remaining(1) > 0) {
      b.samples.push_back(&set[queues[1][head[1]++]]);
      b.samples.push_back(&set[queues[0][head[0]++]]);
    }
    while (b.size() < batch_size && remaining(0) + remaining(1) > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, remaining(0) + remaining(1) - 1);
      const int l = pick(rng) < remaining(1) ? 1 : 0;
      b.samples.push_back(&set[queues[l][head[l]++]]);
    }
    // Within-batch order is irrelevant downstream but keep it shuffled.
    std::shuffle(b.samples.begin(), b.samples.end(), rng);
    finish(b);
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::string& path, const std::string& producer,
                  const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset cache " + path);
  out << kDatasetMagic << "\n";
  out << "# producer=" << producer << " config_hash=" << config_hash << "\n";
  out << "vocab " << ds.vocab.size() << "\n";
  for (Index i = 0; i < ds.vocab.size(); ++i) out << ds.vocab.name(i) << "\n";
  out << "samples " << ds.samples.size() << "\n";
  out.precision(17);
  for (const DataSample& s : ds.samples) {
    out << s.user << " " << s.item << " " << s.label;
    for (const Feature& f : s.features) out << " " << f.id << ":" << f.value;
    out << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset cache " + path);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || trim_cr(line) != kDatasetMagic) {
    throw DataError(path, 1, std::string("missing magic header ") + kDatasetMagic);
  }
  Dataset ds;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("vocab ", 0) == 0) {
      count = static_cast<std::size_t>(parse_int(line.substr(6), path, lineno, "vocab size"));
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw DataError(path, lineno, "truncated vocabulary");
        ++lineno;
        const std::string name = trim_cr(line);
        if (ds.vocab.add(name) != static_cast<Index>(i)) throw DataError(path, lineno, "duplicate feature " + name);
      }
      ds.vocab.freeze();
    } else if (line.rfind("samples ", 0) == 0) {
      count = static_cast<std::size_t>(parse_int(line.substr(8), path, lineno, "sample count"));
      ds.samples.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw DataError(path, lineno, "truncated samples");
        ++lineno;
        std::istringstream ls(trim_cr(line));
        DataSample s;
        std::string tok;
        if (!(ls >> s.user >> s.item >> s.label)) throw DataError(path, lineno, "malformed sample header");
        while (ls >> tok) {
          const auto colon = tok.find(':');
          if (colon == std::string::npos) throw DataError(path, lineno, "malformed feature '" + tok + "'");
          Feature f;
          f.id = parse_int(tok.substr(0, colon), path, lineno, "feature id");
          f.value = parse_double(tok.substr(colon + 1), path, lineno, "feature value");
          s.features.push_back(f);
        }
        try {
          validate_sample(s, ds.vocab.size());
        } catch (const DataError& e) {
          throw DataError(path, lineno, e.what());
        }
        ds.samples.push_back(std::move(s));
      }
    } else {
      throw DataError(path, lineno, "unexpected line '" + line + "'");
    }
  }
  return ds;
}

}  // namespace hirs

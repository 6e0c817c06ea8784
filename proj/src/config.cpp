#include "hirs/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hirs {

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> d{
      // model
      {"dim", "64"},
      {"k", "40"},
      {"hidden", "64"},
      {"gamma", "-0.1"},
      {"delta", "1.1"},
      {"tau", "0.66"},
      {"emb_init_std", "0.1"},
      // training
      {"lambda1", "0.02"},
      {"lambda2", "1.0"},
      {"lambda3", "0.1"},
      {"dropout", "0.1"},
      {"lr", "0.001"},
      {"batch_size", "256"},
      {"epochs", "10"},
      {"seed", "1"},
      {"flags", "full"},
      {"eval_every", "1"},
      {"select_by", "recall10"},
      {"detach_graph_reprs", "false"},
      {"log_wall_time", "false"},
      {"split", "0.7,0.15,0.15"},
      {"gate_threshold", "0.5"},
      // data
      {"dataset", ""},
      {"ratings", ""},
      {"user_features", ""},
      {"item_features", ""},
      {"separator", "::"},
      {"list_separator", "|"},
      {"rating_columns", "user,item,rating,timestamp"},
      {"user_feature_columns", ""},
      {"item_feature_columns", ""},
      {"rating_threshold", "3"},
      {"implicit_mode", "threshold"},
      // outputs
      {"out_dir", ""},
      {"checkpoint", ""},
      // subcommand options
      {"synth_spec", ""},
      {"n_samples", "20000"},
      {"seeds", "3"},
      {"k_list", "5,10,20,40,60"},
      {"m_list", "10"},
      {"bench_samples", "2048"},
      {"bench_repeats", "3"},
      {"sample_index", "0"},
      {"dump_count", "1"},
      {"gradcheck_seeds", "20"},
      {"gradcheck_tol", "1e-4"},
      {"gradcheck_dim", "6"},
      {"gradcheck_k", "4"},
      {"gradcheck_hidden", "8"},
      {"gradcheck_batch", "4"},
      {"recovery_samples", "500"},
      {"prop2_epochs", "150"},
  };
  return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) {
    std::string valid;
    for (const auto& [k, v] : defaults()) valid += " " + k;
    throw ConfigError("unknown config key '" + key + "'; valid keys:" + valid);
  }
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key '" + key + "' is not a number: '" + get(key) + "'");
  }
}

long long RunConfig::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" + get(key) + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no" || v.empty()) return false;
  throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& s : get_strings(key)) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key '" + key + "' has a non-numeric entry '" + s + "'");
    }
  }
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "out_dir") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

}  // namespace hirs

#include "ssc/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ssc/common.hpp"

namespace ssc::pipeline {

namespace {

struct Default {
  const char* key;
  const char* value;
  const char* help;
};

// clang-format off
constexpr Default kDefaults[] = {
  {"seed", "1", "global seed"},
  {"threads", "1", "worker cap"},
  {"out", "out", "output directory"},

  {"corpus.dir", "", "existing corpus directory; empty means <out>/corpus"},
  {"corpus.n_benign", "90", "benign slides to generate"},
  {"corpus.n_cancer", "80", "cancer slides to generate"},
  {"corpus.size", "256", "slide edge in pixels"},
  {"corpus.spacing_um", "0.455", "pixel spacing"},

  {"net.cnn1_scale", "0.25", "channel scale of the tiny CNN I"},
  {"net.cnn2_scale", "0.125", "channel scale of the tiny CNN II"},
  {"net.patch", "32", "training patch edge"},
  {"net.dropout", "0.5", "dropout rate after each hidden layer"},

  {"cnn1.lr", "0.01", "initial learning rate"},
  {"cnn1.lr_drop", "5", "divisor at each drop"},
  {"cnn1.patience", "10", "initial epoch patience"},
  {"cnn1.patience_growth", "1.2", "patience factor after a drop"},
  {"cnn1.min_lr", "0.00001", "stop below this rate"},
  {"cnn1.momentum", "0.9", "Nesterov momentum"},
  {"cnn1.l2", "0.003", "weight decay"},
  {"cnn1.batch", "128", "minibatch size"},
  {"cnn1.steps_per_epoch", "20", "minibatches per epoch"},
  {"cnn1.max_epochs", "40", "epoch cap for the first round"},
  {"cnn1.round_epochs", "10", "epoch cap for each mining round"},
  {"cnn1.validation_patches", "600", "fixed validation patches"},

  {"cnn2.lr", "0.01", "initial learning rate"},
  {"cnn2.lr_drop", "5", "divisor at each drop"},
  {"cnn2.patience", "10", "initial epoch patience"},
  {"cnn2.patience_growth", "1.2", "patience factor after a drop"},
  {"cnn2.min_lr", "0.00001", "stop below this rate"},
  {"cnn2.momentum", "0.9", "Nesterov momentum"},
  {"cnn2.l2", "0.0001", "weight decay"},
  {"cnn2.batch", "22", "minibatch size"},
  {"cnn2.steps_per_epoch", "20", "minibatches per epoch"},
  {"cnn2.max_epochs", "16", "epoch cap for the first round"},
  {"cnn2.round_epochs", "8", "epoch cap for each mining round"},
  {"cnn2.validation_patches", "600", "fixed validation patches"},
  {"cnn2.weight_growth", "1.0034", "per-epoch growth of the normal-stroma loss weight"},

  {"augment.rotate", "true", "random quarter turns"},
  {"augment.flip", "true", "random flips"},
  {"augment.hue_deg", "18", "max hue offset"},
  {"augment.saturation", "0.15", "max relative saturation change"},

  {"mining.rounds", "2", "hard negative mining rounds in run-all"},
  {"mining.min_cells", "64", "smallest mined component, in map cells"},
  {"mine.net", "cnn2", "network mined by the mine command: cnn1 or cnn2"},
  {"mine.round", "1", "round produced by the mine command"},
  {"train.round", "0", "round trained by train-cnn1 / train-cnn2"},

  {"infer.tile", "0", "tile edge in pixels; 0 is a single pass"},

  {"features.threshold", "0.9", "likelihood threshold T"},
  {"features.manifest", "", "feature manifest JSON; empty means the built-in one"},
  {"features.source", "maps", "maps or oracle (ground truth rasters)"},
  {"features.tune_threshold", "false", "pick T by cross-validation on train+validation"},
  {"features.threshold_grid", "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95", "candidates for tuning"},
  {"features.cv_folds", "5", "folds for threshold tuning"},

  {"rf.trees", "100", "trees in the forest"},
  {"rf.max_features", "0", "features per split; 0 means ceil(sqrt(p))"},
  {"eval.bootstrap", "1000", "bootstrap resamples"},
  {"eval.level", "0.95", "confidence level"},
};
// clang-format on

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config::Config() {
  for (const Default& d : kDefaults) {
    index_[d.key] = entries_.size();
    entries_.push_back({d.key, d.value, d.help});
  }
}

Config::Entry& Config::find(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
  return entries_[it->second];
}

const Config::Entry& Config::find(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
  return entries_[it->second];
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parse(ss.str(), path.string());
}

void Config::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) { find(key).value = value; }

const std::string& Config::str(const std::string& key) const { return find(key).value; }

double Config::real(const std::string& key) const {
  const std::string& v = str(key);
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": '" + v + "' is not a number");
  return out;
}

long long Config::integer(const std::string& key) const {
  const std::string& v = str(key);
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": '" + v + "' is not an integer");
  return out;
}

std::uint64_t Config::u64(const std::string& key) const {
  const std::string& v = str(key);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
  return out;
}

bool Config::boolean(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

void Config::validate() const {
  auto positive = [&](const std::string& k) {
    if (!(real(k) > 0)) throw ConfigError(k + " must be positive");
  };
  auto at_least = [&](const std::string& k, long long lo) {
    if (integer(k) < lo) throw ConfigError(k + " must be >= " + std::to_string(lo));
  };
  auto unit = [&](const std::string& k) {
    const double v = real(k);
    if (!(v >= 0 && v <= 1)) throw ConfigError(k + " must be in [0, 1]");
  };
  u64("seed");
  at_least("threads", 1);
  at_least("corpus.n_benign", 0);
  at_least("corpus.n_cancer", 0);
  at_least("corpus.size", 64);
  positive("corpus.spacing_um");
  positive("net.cnn1_scale");
  positive("net.cnn2_scale");
  at_least("net.patch", 8);
  for (const char* net : {"cnn1", "cnn2"}) {
    const std::string p = net;
    for (const char* k : {".lr", ".min_lr", ".patience"}) positive(p + k);
    if (real(p + ".lr_drop") <= 1) throw ConfigError(p + ".lr_drop must exceed 1");
    if (real(p + ".patience_growth") < 1) throw ConfigError(p + ".patience_growth must be >= 1");
    unit(p + ".momentum");
    if (real(p + ".l2") < 0) throw ConfigError(p + ".l2 must be >= 0");
    at_least(p + ".batch", 1);
    at_least(p + ".steps_per_epoch", 0);
    at_least(p + ".max_epochs", 0);
    at_least(p + ".round_epochs", 0);
    at_least(p + ".validation_patches", 1);
  }
  positive("cnn2.weight_growth");
  unit("net.dropout");
  boolean("augment.rotate");
  boolean("augment.flip");
  if (real("augment.hue_deg") < 0) throw ConfigError("augment.hue_deg must be >= 0");
  unit("augment.saturation");
  at_least("mining.rounds", 0);
  at_least("mining.min_cells", 1);
  if (str("mine.net") != "cnn1" && str("mine.net") != "cnn2")
    throw ConfigError("mine.net must be cnn1 or cnn2");
  at_least("mine.round", 1);
  at_least("train.round", 0);
  at_least("infer.tile", 0);
  unit("features.threshold");
  if (str("features.source") != "maps" && str("features.source") != "oracle")
    throw ConfigError("features.source must be maps or oracle");
  boolean("features.tune_threshold");
  at_least("features.cv_folds", 2);
  at_least("rf.trees", 1);
  at_least("rf.max_features", 0);
  at_least("eval.bootstrap", 1);
  const double level = real("eval.level");
  if (!(level > 0 && level < 1)) throw ConfigError("eval.level must be in (0, 1)");
}

std::string Config::dump() const {
  std::string out;
  for (const Entry& e : entries_) out += e.key + " = " + e.value + "  # " + e.help + "\n";
  return out;
}

}  // namespace ssc::pipeline

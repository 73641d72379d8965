#include "ssc/pipeline/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ssc/arch/architectures.hpp"
#include "ssc/corpus/corpus.hpp"
#include "ssc/forest/forest.hpp"
#include "ssc/geometry/features.hpp"
#include "ssc/nn/checkpoint.hpp"
#include "ssc/parallel.hpp"
#include "ssc/train/harness.hpp"
#include "ssc/wsi/inference.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssc::pipeline {

namespace {

void log(const std::string& msg) { std::clog << "[ssc] " << msg << std::endl; }

std::string net_name(int which) { return which == 1 ? "cnn1" : "cnn2"; }

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing artifact " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void require(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact " + path.string());
}

int threads_of(const Config& c) { return static_cast<int>(c.integer("threads")); }

fs::path checkpoint_path(const Config& c, int which, int round) {
  return out_dir(c) / "checkpoints" / (net_name(which) + "_r" + std::to_string(round) + ".ssc");
}
fs::path checkpoint_meta(const Config& c, int which, int round) {
  return out_dir(c) / "checkpoints" / (net_name(which) + "_r" + std::to_string(round) + ".json");
}
fs::path final_checkpoint(const Config& c, int which) {
  return out_dir(c) / "checkpoints" / (net_name(which) + ".ssc");
}
fs::path mined_path(const Config& c, int which, int round) {
  return out_dir(c) / "mined" / (net_name(which) + "_r" + std::to_string(round) + ".json");
}
fs::path map_path(const Config& c, const std::string& id, int which) {
  return out_dir(c) / "maps" / (id + "." + net_name(which) + ".png");
}

nn::Network load_network(const fs::path& path) {
  require(path);
  return nn::load_checkpoint(path);
}

arch::NetworkSpec network_spec(const Config& c, int which) {
  const int patch = static_cast<int>(c.integer("net.patch"));
  arch::NetworkSpec s = which == 1 ? arch::tiny_cnn1_spec(c.real("net.cnn1_scale"), patch)
                                   : arch::tiny_cnn2_spec(c.real("net.cnn2_scale"), patch);
  s.dropout = c.real("net.dropout");
  for (auto& l : s.layers)
    if (l.kind == nn::LayerKind::dropout) l.rate = s.dropout;
  return s;
}

struct Slides {
  std::vector<corpus::ManifestRow> rows;
  std::vector<wsi::SlideImage> images;
  std::vector<AnnotatedRegion> regions;
};

Slides load_split(const Config& c, const std::string& split, bool with_regions) {
  const fs::path dir = corpus_dir(c);
  Slides s;
  for (const auto& row : corpus::read_manifest(dir))
    if (row.split == split) s.rows.push_back(row);
  s.images.resize(s.rows.size());
  std::vector<std::vector<AnnotatedRegion>> regions(s.rows.size());
  parallel_for(s.rows.size(), threads_of(c), [&](std::size_t i) {
    s.images[i] = corpus::load_slide(dir, s.rows[i].slide_id);
    if (with_regions) regions[i] = corpus::load_regions(dir, s.rows[i].slide_id);
  });
  for (auto& r : regions) s.regions.insert(s.regions.end(), r.begin(), r.end());
  return s;
}

train::TrainConfig train_config(const Config& c, int which, int round) {
  const std::string p = net_name(which) + ".";
  train::TrainConfig t;
  t.batch_size = static_cast<int>(c.integer(p + "batch"));
  t.steps_per_epoch = static_cast<int>(c.integer(p + "steps_per_epoch"));
  t.max_epochs = static_cast<int>(c.integer(round == 0 ? p + "max_epochs" : p + "round_epochs"));
  t.min_learning_rate = c.real(p + "min_lr");
  t.momentum = c.real(p + "momentum");
  t.l2_lambda = c.real(p + "l2");
  t.schedule.learning_rate = c.real(p + "lr");
  t.schedule.drop_factor = c.real(p + "lr_drop");
  t.schedule.patience = c.real(p + "patience");
  t.schedule.patience_growth = c.real(p + "patience_growth");
  t.escalate_negative_weight = which == 2;
  if (which == 2) t.weight_growth = c.real("cnn2.weight_growth");
  t.augmentation.rotate = c.boolean("augment.rotate");
  t.augmentation.flip = c.boolean("augment.flip");
  t.augmentation.hue_jitter_deg = c.real("augment.hue_deg");
  t.augmentation.saturation_jitter = c.real("augment.saturation");
  t.validation_patches = static_cast<int>(c.integer(p + "validation_patches"));
  t.seed = stage_seed(c.u64("seed"), net_name(which) + "/train/r" + std::to_string(round));
  t.threads = threads_of(c);
  return t;
}

// history.csv is rebuilt from every round's metadata so that it only depends
// on which stages have run.
void rebuild_history(const Config& c) {
  std::string csv = "net,round,epoch,loss,val_acc,lr,neg_weight\n";
  for (int which : {1, 2})
    for (int round = 0;; ++round) {
      const fs::path meta = checkpoint_meta(c, which, round);
      if (!fs::exists(meta)) break;
      const json j = read_json(meta);
      for (const auto& h : j.at("history"))
        csv += net_name(which) + "," + std::to_string(round) + "," +
               std::to_string(h.at("epoch").get<int>()) + "," + fmt(h.at("loss").get<double>()) +
               "," + fmt(h.at("val_acc").get<double>()) + "," + fmt(h.at("lr").get<double>()) +
               "," + fmt(h.at("neg_weight").get<double>()) + "\n";
    }
  write_text(out_dir(c) / "history.csv", csv);
}

double accuracy_cnn1(const wsi::LabelMap& m, const Grid<std::uint8_t>& truth, double& total) {
  double correct = 0;
  for (int r = 0; r < m.labels.rows(); ++r)
    for (int q = 0; q < m.labels.cols(); ++q) {
      const auto t = static_cast<std::uint8_t>(
          corpus::tissue_of(truth.at(m.geometry.centre(r), m.geometry.centre(q))));
      if (t == 0) continue;
      total += 1;
      correct += m.labels.at(r, q) == t;
    }
  return correct;
}

double accuracy_cnn2(const wsi::LikelihoodMap& m, const Grid<std::uint8_t>& truth,
                     double& total) {
  double correct = 0;
  for (int r = 0; r < m.values.rows(); ++r)
    for (int q = 0; q < m.values.cols(); ++q) {
      const auto t = static_cast<corpus::Truth>(
          truth.at(m.geometry.centre(r), m.geometry.centre(q)));
      if (t != corpus::Truth::normal_stroma && t != corpus::Truth::tumor_stroma) continue;
      total += 1;
      const bool tumour = m.applicable.at(r, q) && m.values.at(r, q) >= 0.5f;
      correct += tumour == (t == corpus::Truth::tumor_stroma);
    }
  return correct;
}

struct FeatureTable {
  std::vector<corpus::ManifestRow> rows;
  std::vector<std::vector<double>> values;
};

geometry::FeatureManifest feature_manifest(const Config& c) {
  const std::string& path = c.str("features.manifest");
  return path.empty() ? geometry::default_manifest() : geometry::load_manifest(path);
}

FeatureTable compute_features(const Config& c, const std::vector<corpus::ManifestRow>& rows,
                              double threshold, const geometry::FeatureManifest& manifest) {
  FeatureTable t;
  t.rows = rows;
  t.values.resize(rows.size());
  const bool oracle = c.str("features.source") == "oracle";
  const fs::path dir = corpus_dir(c);
  const auto oracle_geometry =
      wsi::map_geometry(arch::stride_profile(network_spec(c, 1)), c.real("corpus.spacing_um"));
  parallel_for(rows.size(), threads_of(c), [&](std::size_t i) {
    const std::string& id = rows[i].slide_id;
    geometry::FeatureVector fv;
    if (oracle) {
      fv = corpus::oracle_features(corpus::load_truth(dir, id), oracle_geometry, threshold,
                                   manifest);
    } else {
      const wsi::LabelMap m1 = wsi::read_label_map(map_path(c, id, 1));
      const wsi::LikelihoodMap m2 = wsi::read_likelihood_map(map_path(c, id, 2));
      fv = geometry::assemble_features(m1, wsi::restrict_to_stroma(m2, m1), threshold, manifest);
    }
    t.values[i] = std::move(fv.values);
  });
  return t;
}

forest::ForestConfig forest_config(const Config& c, const std::string& tag) {
  forest::ForestConfig f;
  f.n_trees = static_cast<int>(c.integer("rf.trees"));
  f.max_features = static_cast<int>(c.integer("rf.max_features"));
  f.seed = stage_seed(c.u64("seed"), tag);
  f.threads = threads_of(c);
  return f;
}

forest::Dataset to_dataset(const FeatureTable& t, const geometry::FeatureManifest& manifest,
                           bool (*keep)(const std::string&)) {
  forest::Dataset d;
  d.manifest_version = manifest.version;
  for (const auto& f : manifest.features) d.feature_names.push_back(f.name);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (!keep(t.rows[i].split)) continue;
    d.rows.push_back(t.values[i]);
    d.labels.push_back(t.rows[i].label == "cancer" ? 1 : 0);
    d.patient_ids.push_back(t.rows[i].patient_id);
    d.slide_ids.push_back(t.rows[i].slide_id);
  }
  return d;
}

bool is_fit_split(const std::string& s) { return s == "train" || s == "validation"; }
bool is_test_split(const std::string& s) { return s == "test"; }

std::vector<double> threshold_grid(const Config& c) {
  std::vector<double> grid;
  std::stringstream ss(c.str("features.threshold_grid"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    Config probe;
    probe.set("features.threshold", item);
    grid.push_back(probe.real("features.threshold"));
    if (!(grid.back() >= 0 && grid.back() <= 1))
      throw ConfigError("features.threshold_grid values must be in [0, 1]");
  }
  if (grid.empty()) throw ConfigError("features.threshold_grid is empty");
  return grid;
}

struct FeatureFile {
  std::string manifest_version;
  std::vector<std::string> names;
  FeatureTable table;
};

FeatureFile read_features(const Config& c) {
  const fs::path csv = out_dir(c) / "features.csv";
  std::ifstream in(csv);
  if (!in) throw IoError("missing artifact " + csv.string());
  FeatureFile f;
  f.manifest_version = read_json(out_dir(c) / "features_meta.json").at("manifest_version");
  std::string line;
  std::getline(in, line);
  {
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ','))
      if (col++ >= 4) f.names.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    corpus::ManifestRow row;
    std::getline(ss, row.slide_id, ',');
    std::getline(ss, row.patient_id, ',');
    std::getline(ss, row.label, ',');
    std::getline(ss, row.split, ',');
    std::vector<double> v;
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double x = 0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (ec != std::errc() || p != cell.data() + cell.size())
        throw IoError("features.csv: bad number '" + cell + "'");
      v.push_back(x);
    }
    if (v.size() != f.names.size()) throw IoError("features.csv: ragged row " + row.slide_id);
    f.table.rows.push_back(row);
    f.table.values.push_back(std::move(v));
  }
  return f;
}

}  // namespace

fs::path out_dir(const Config& config) { return config.str("out"); }

fs::path corpus_dir(const Config& config) {
  const std::string& d = config.str("corpus.dir");
  return d.empty() ? out_dir(config) / "corpus" : fs::path(d);
}

std::uint64_t stage_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char ch : tag) h = (h ^ ch) * 1099511628211ull;
  Rng rng = derive_rng(seed, h);
  return rng();
}

void gen_corpus(const Config& c) {
  c.validate();
  corpus::CorpusConfig cc;
  cc.n_benign = static_cast<int>(c.integer("corpus.n_benign"));
  cc.n_cancer = static_cast<int>(c.integer("corpus.n_cancer"));
  cc.seed = stage_seed(c.u64("seed"), "corpus");
  cc.size = static_cast<int>(c.integer("corpus.size"));
  cc.spacing_um = c.real("corpus.spacing_um");
  log("generating " + std::to_string(cc.n_benign + cc.n_cancer) + " slides into " +
      corpus_dir(c).string());
  const corpus::Corpus corp = corpus::generate_corpus(cc, threads_of(c));
  corpus::write_corpus(corpus_dir(c), corp);
}

void train_cnn(const Config& c, int which) {
  c.validate();
  const int round = static_cast<int>(c.integer("train.round"));
  const std::string name = net_name(which);
  const train::Task task = which == 1 ? train::cnn1_task() : train::cnn2_task();
  Slides tr = load_split(c, "train", true);
  Slides va = load_split(c, "validation", true);

  nn::Network init;
  int first_epoch = 0;
  if (round == 0) {
    Rng rng = derive_rng(stage_seed(c.u64("seed"), name + "/init"), 0);
    init = arch::build_network(network_spec(c, which), rng);
  } else {
    init = load_network(checkpoint_path(c, which, round - 1));
    const json prev = read_json(checkpoint_meta(c, which, round - 1));
    first_epoch = prev.at("next_epoch").get<int>();
    for (int r = 1; r <= round; ++r) {
      require(mined_path(c, which, r));
      auto mined = read_annotations(mined_path(c, which, r));
      tr.regions.insert(tr.regions.end(), mined.begin(), mined.end());
    }
  }
  const int patch = static_cast<int>(c.integer("net.patch"));
  train::PatchSampler ts(task, tr.images, tr.regions, patch);
  train::PatchSampler vs(task, va.images, va.regions, patch);
  const train::TrainConfig tc = train_config(c, which, round);
  log("training " + name + " round " + std::to_string(round) + " on " +
      std::to_string(tr.images.size()) + " slides");
  const auto t0 = std::chrono::steady_clock::now();
  train::TrainResult res = train::train(init, ts, vs, tc, first_epoch);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log(name + " round " + std::to_string(round) + ": best validation accuracy " +
      fmt(res.best_val_acc) + " after " + std::to_string(res.history.size()) + " epochs (" +
      fmt(std::round(secs * 10) / 10) + " s)");

  nn::save_checkpoint(checkpoint_path(c, which, round), res.network);
  nn::save_checkpoint(final_checkpoint(c, which), res.network);
  json meta;
  meta["net"] = name;
  meta["round"] = round;
  meta["best_val_acc"] = res.best_val_acc;
  meta["next_epoch"] = first_epoch + static_cast<int>(res.history.size());
  meta["history"] = json::array();
  for (const auto& h : res.history)
    meta["history"].push_back({{"epoch", h.epoch},
                               {"loss", h.loss},
                               {"val_acc", h.val_acc},
                               {"lr", h.lr},
                               {"neg_weight", h.neg_weight}});
  write_text(checkpoint_meta(c, which, round), meta.dump(2) + "\n");
  // A retrained earlier round invalidates any later ones.
  for (int r = round + 1; fs::exists(checkpoint_meta(c, which, r)); ++r) {
    fs::remove(checkpoint_meta(c, which, r));
    fs::remove(checkpoint_path(c, which, r));
  }
  rebuild_history(c);
}

void mine(const Config& c) {
  c.validate();
  const int which = c.str("mine.net") == "cnn1" ? 1 : 2;
  const int round = static_cast<int>(c.integer("mine.round"));
  const nn::Network net = load_network(checkpoint_path(c, which, round - 1));
  const nn::Network fcn = arch::convolutionalize(net);
  const auto profile = arch::stride_profile(fcn.layers());
  Slides tr = load_split(c, "train", false);
  train::MiningConfig mc;
  mc.min_cells = static_cast<int>(c.integer("mining.min_cells"));
  mc.threshold = c.real("features.threshold");
  std::vector<std::vector<AnnotatedRegion>> per_slide(tr.images.size());
  const fs::path dir = corpus_dir(c);
  const int tile = static_cast<int>(c.integer("infer.tile"));
  parallel_for(tr.images.size(), threads_of(c), [&](std::size_t i) {
    const auto& slide = tr.images[i];
    const auto truth = corpus::load_truth(dir, slide.slide_id);
    const auto pm =
        wsi::infer_map(fcn, profile, slide, wsi::background_mask(slide.rgb), tile);
    per_slide[i] = which == 1
                       ? train::mine_cnn1(wsi::to_label_map(pm), truth, slide.slide_id, mc)
                       : train::mine_cnn2(wsi::to_likelihood_map(pm), truth, slide.slide_id, mc);
  });
  std::vector<AnnotatedRegion> all;
  for (auto& v : per_slide) all.insert(all.end(), v.begin(), v.end());
  log("mined " + std::to_string(all.size()) + " regions for " + net_name(which) + " round " +
      std::to_string(round));
  write_annotations(mined_path(c, which, round), all);
}

void infer(const Config& c) {
  c.validate();
  const nn::Network fcn1 = arch::convolutionalize(load_network(final_checkpoint(c, 1)));
  const nn::Network fcn2 = arch::convolutionalize(load_network(final_checkpoint(c, 2)));
  const auto p1 = arch::stride_profile(fcn1.layers());
  const auto p2 = arch::stride_profile(fcn2.layers());
  if (p1.output_stride != p2.output_stride || p1.receptive_field != p2.receptive_field)
    throw ConfigError("CNN I and CNN II maps would not be aligned");
  const fs::path dir = corpus_dir(c);
  const auto rows = corpus::read_manifest(dir);
  const int tile = static_cast<int>(c.integer("infer.tile"));
  struct Acc {
    double c1 = 0, n1 = 0, c2 = 0, n2 = 0;
  };
  std::vector<Acc> acc(rows.size());
  log("inferring maps for " + std::to_string(rows.size()) + " slides");
  parallel_for(rows.size(), threads_of(c), [&](std::size_t i) {
    const auto slide = corpus::load_slide(dir, rows[i].slide_id);
    const Mask tissue = wsi::background_mask(slide.rgb);
    const wsi::LabelMap m1 = wsi::to_label_map(wsi::infer_map(fcn1, p1, slide, tissue, tile));
    const wsi::LikelihoodMap m2 =
        wsi::to_likelihood_map(wsi::infer_map(fcn2, p2, slide, tissue, tile));
    wsi::write_label_map(map_path(c, rows[i].slide_id, 1), m1);
    wsi::write_likelihood_map(map_path(c, rows[i].slide_id, 2), m2);
    const auto truth = corpus::load_truth(dir, rows[i].slide_id);
    acc[i].c1 = accuracy_cnn1(m1, truth, acc[i].n1);
    acc[i].c2 = accuracy_cnn2(m2, truth, acc[i].n2);
  });
  // Cell-level accuracy against the generator's ground truth, per split.
  json out;
  for (const char* split : {"train", "validation", "test"}) {
    Acc sum;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].split == split) {
        sum.c1 += acc[i].c1;
        sum.n1 += acc[i].n1;
        sum.c2 += acc[i].c2;
        sum.n2 += acc[i].n2;
      }
    out["cnn1"][split] = sum.n1 > 0 ? sum.c1 / sum.n1 : 0.0;
    out["cnn2"][split] = sum.n2 > 0 ? sum.c2 / sum.n2 : 0.0;
  }
  write_text(out_dir(c) / "maps" / "accuracy.json", out.dump(2) + "\n");
  log("test cell accuracy: CNN I " + fmt(out["cnn1"]["test"].get<double>()) + ", CNN II " +
      fmt(out["cnn2"]["test"].get<double>()));
}

void features(const Config& c) {
  c.validate();
  const auto manifest = feature_manifest(c);
  const auto rows = corpus::read_manifest(corpus_dir(c));
  double threshold = c.real("features.threshold");
  json meta;
  if (c.boolean("features.tune_threshold")) {
    std::vector<corpus::ManifestRow> fit;
    for (const auto& r : rows)
      if (is_fit_split(r.split)) fit.push_back(r);
    double best_auc = -1;
    for (double t : threshold_grid(c)) {
      const FeatureTable table = compute_features(c, fit, t, manifest);
      const forest::Dataset d = to_dataset(table, manifest, is_fit_split);
      const auto scores = forest::cross_validated_scores(
          d, static_cast<int>(c.integer("features.cv_folds")), forest_config(c, "rf/tune"));
      const double auc = forest::roc_auc(scores, d.labels).auc;
      meta["tuning"].push_back({{"threshold", t}, {"cv_auc", auc}});
      if (auc > best_auc) {
        best_auc = auc;
        threshold = t;
      }
    }
    log("tuned threshold " + fmt(threshold) + " (cv AUC " + fmt(best_auc) + ")");
  }
  const FeatureTable table = compute_features(c, rows, threshold, manifest);
  std::string csv = "slide_id,patient_id,label,split";
  for (const auto& f : manifest.features) csv += "," + f.name;
  csv += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += rows[i].slide_id + "," + rows[i].patient_id + "," + rows[i].label + "," +
           rows[i].split;
    for (double v : table.values[i]) csv += "," + fmt(v);
    csv += "\n";
  }
  write_text(out_dir(c) / "features.csv", csv);
  meta["manifest_version"] = manifest.version;
  meta["threshold"] = threshold;
  meta["source"] = c.str("features.source");
  write_text(out_dir(c) / "features_meta.json", meta.dump(2) + "\n");
  write_text(out_dir(c) / "feature_manifest.json", geometry::manifest_to_json(manifest) + "\n");
  log("wrote " + std::to_string(rows.size()) + " feature rows");
}

void train_rf(const Config& c) {
  c.validate();
  const FeatureFile f = read_features(c);
  forest::Dataset d;
  d.manifest_version = f.manifest_version;
  d.feature_names = f.names;
  for (std::size_t i = 0; i < f.table.rows.size(); ++i) {
    if (!is_fit_split(f.table.rows[i].split)) continue;
    d.rows.push_back(f.table.values[i]);
    d.labels.push_back(f.table.rows[i].label == "cancer" ? 1 : 0);
    d.patient_ids.push_back(f.table.rows[i].patient_id);
    d.slide_ids.push_back(f.table.rows[i].slide_id);
  }
  const forest::ForestModel model = forest::rf_train(d, forest_config(c, "rf"));
  forest::save_forest(out_dir(c) / "model.json", model);
  log("trained " + std::to_string(model.trees.size()) + " trees on " +
      std::to_string(d.size()) + " slides");
}

void evaluate(const Config& c) {
  c.validate();
  const forest::ForestModel model = forest::load_forest(out_dir(c) / "model.json");
  const FeatureFile f = read_features(c);
  if (f.names != model.feature_names)
    throw ConfigError("features.csv columns do not match the model");
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> patients, slides;
  for (std::size_t i = 0; i < f.table.rows.size(); ++i) {
    if (!is_test_split(f.table.rows[i].split)) continue;
    scores.push_back(forest::rf_predict(model, f.table.values[i], f.manifest_version));
    labels.push_back(f.table.rows[i].label == "cancer" ? 1 : 0);
    patients.push_back(f.table.rows[i].patient_id);
    slides.push_back(f.table.rows[i].slide_id);
  }
  const forest::RocResult roc = forest::roc_auc(scores, labels);
  const int n_boot = static_cast<int>(c.integer("eval.bootstrap"));
  const double level = c.real("eval.level");
  const std::uint64_t boot_seed = stage_seed(c.u64("seed"), "bootstrap");
  const forest::ConfidenceInterval ci =
      forest::bootstrap_ci(scores, labels, patients, n_boot, level, boot_seed, threads_of(c));

  const fs::path out = out_dir(c);
  forest::write_roc_csv(out / "roc.csv", roc);
  forest::write_roc_png(out / "roc.png", roc);
  std::string sc = "slide_id,patient_id,label,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    sc += slides[i] + "," + patients[i] + "," + std::to_string(labels[i]) + "," + fmt(scores[i]) +
          "\n";
  write_text(out / "scores.csv", sc);

  json report;
  report["auc"] = roc.auc;
  report["ci_low"] = ci.low;
  report["ci_high"] = ci.high;
  report["ci_level"] = level;
  report["ci_method"] = "percentile, patient-stratified bootstrap";
  report["bootstrap_resamples"] = n_boot;
  report["bootstrap_successful"] = ci.resamples;
  report["n_test"] = scores.size();
  report["n_cancer"] = std::count(labels.begin(), labels.end(), 1);
  report["n_benign"] = std::count(labels.begin(), labels.end(), 0);
  report["seed"] = c.u64("seed");
  report["manifest_version"] = f.manifest_version;
  report["threshold"] = read_json(out / "features_meta.json").at("threshold");
  report["trees"] = model.trees.size();
  const fs::path acc = out / "maps" / "accuracy.json";
  if (fs::exists(acc)) {
    const json a = read_json(acc);
    report["cell_accuracy"] = {{"cnn1", a.at("cnn1").at("test")},
                               {"cnn2", a.at("cnn2").at("test")}};
  }
  write_text(out / "report.json", report.dump(2) + "\n");
  log("test AUC " + fmt(roc.auc) + " (" + fmt(level * 100) + "% CI " + fmt(ci.low) + " to " +
      fmt(ci.high) + ")");
}

void run_all(const Config& config) {
  config.validate();
  Config c = config;
  json timing;
  auto timed = [&](const std::string& stage, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    timing[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const auto start = std::chrono::steady_clock::now();
  if (config.str("corpus.dir").empty()) timed("gen-corpus", [&] { gen_corpus(c); });
  const int rounds = static_cast<int>(c.integer("mining.rounds"));
  for (int which : {1, 2}) {
    const std::string name = net_name(which);
    c.set("mine.net", name);
    for (int round = 0; round <= rounds; ++round) {
      if (round > 0) {
        c.set("mine.round", std::to_string(round));
        timed("mine-" + name + "-r" + std::to_string(round), [&] { mine(c); });
      }
      c.set("train.round", std::to_string(round));
      timed("train-" + name + "-r" + std::to_string(round), [&] { train_cnn(c, which); });
    }
  }
  timed("infer", [&] { infer(c); });
  timed("features", [&] { features(c); });
  timed("train-rf", [&] { train_rf(c); });
  timed("evaluate", [&] { evaluate(c); });
  timing["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Wall-clock numbers live apart from the reproducible artefacts.
  write_text(out_dir(c) / "timing.json", timing.dump(2) + "\n");
  write_text(out_dir(c) / "config.used", c.dump());
}

}  // namespace ssc::pipeline

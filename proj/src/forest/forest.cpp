#include "ssc/forest/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ssc/common.hpp"
#include "ssc/grid.hpp"
#include "ssc/io/png.hpp"
#include "ssc/parallel.hpp"

namespace ssc::forest {

namespace {

void validate(const Dataset& data) {
  if (data.rows.size() != data.labels.size())
    throw ShapeError("dataset rows and labels differ in length");
  if (data.rows.empty()) throw ConfigError("empty dataset");
  const std::size_t p = data.rows.front().size();
  if (p == 0) throw ConfigError("dataset has no features");
  if (!data.feature_names.empty() && data.feature_names.size() != p)
    throw ShapeError("feature names do not match row width");
  bool seen[2] = {false, false};
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (data.rows[i].size() != p) throw ShapeError("ragged dataset rows");
    for (double v : data.rows[i])
      if (!std::isfinite(v)) throw NonFiniteError("non-finite feature value");
    if (data.labels[i] != 0 && data.labels[i] != 1) throw ConfigError("labels must be 0 or 1");
    seen[data.labels[i]] = true;
  }
  if (!seen[0] || !seen[1]) throw ConfigError("random forest needs both classes");
}

double gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n == 0) return 0;
  const double a = n0 / n, b = n1 / n;
  return 1.0 - a * a - b * b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, int mtry, Rng& rng) : data_(data), mtry_(mtry), rng_(rng) {}

  Tree build(std::vector<int> rows) {
    tree_ = Tree{};
    grow(std::move(rows));
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0;
    double score = 0;  // weighted child impurity
  };

  int grow(std::vector<int> rows) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double n1 = 0;
    for (int r : rows) n1 += data_.labels[r];
    const double n0 = static_cast<double>(rows.size()) - n1;
    if (n0 == 0 || n1 == 0 || rows.size() < 2) {
      make_leaf(id, n0, n1);
      return id;
    }
    Split best = choose(rows, n0, n1);
    if (best.feature < 0) {
      make_leaf(id, n0, n1);
      return id;
    }
    std::vector<int> left, right;
    for (int r : rows)
      (data_.rows[r][best.feature] <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left));
    const int rr = grow(std::move(right));
    Node& node = tree_.nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  void make_leaf(int id, double n0, double n1) {
    tree_.nodes[id].probs = {n0 / (n0 + n1), n1 / (n0 + n1)};
  }

  // Draws features without replacement; keeps drawing past mtry only while no
  // valid split has been found.
  Split choose(const std::vector<int>& rows, double n0, double n1) {
    const int p = static_cast<int>(data_.rows.front().size());
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    Split best;
    best.score = gini(n0, n1);
    bool found = false;
    for (int k = 0; k < p; ++k) {
      const std::size_t j = k + uniform_index(rng_, p - k);
      std::swap(order[k], order[j]);
      Split s = best_on(rows, order[k], n0, n1);
      if (s.feature >= 0 && (!found || s.score < best.score)) {
        best = s;
        found = true;
      }
      if (k + 1 >= mtry_ && found) break;
    }
    return found ? best : Split{};
  }

  Split best_on(const std::vector<int>& rows, int f, double n0, double n1) {
    buf_.clear();
    for (int r : rows) buf_.push_back({data_.rows[r][f], data_.labels[r]});
    std::sort(buf_.begin(), buf_.end());
    Split best;
    const double n = n0 + n1;
    double l0 = 0, l1 = 0;
    for (std::size_t i = 0; i + 1 < buf_.size(); ++i) {
      (buf_[i].second ? l1 : l0) += 1;
      if (buf_[i].first == buf_[i + 1].first) continue;
      const double nl = l0 + l1, nr = n - nl;
      const double score = (nl * gini(l0, l1) + nr * gini(n0 - l0, n1 - l1)) / n;
      if (best.feature < 0 || score < best.score) {
        best.feature = f;
        best.score = score;
        // An observed value rather than a midpoint: splits then depend on
        // order alone, so monotone feature transforms leave predictions intact.
        best.threshold = buf_[i].first;
      }
    }
    return best;
  }

  const Dataset& data_;
  int mtry_;
  Rng& rng_;
  Tree tree_;
  std::vector<std::pair<double, int>> buf_;
};

double leaf_cancer(const Tree& t, std::span<const double> x) {
  int i = 0;
  while (t.nodes[i].feature >= 0) {
    const Node& n = t.nodes[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return t.nodes[i].probs[1];
}

}  // namespace

ForestModel rf_train(const Dataset& data, const ForestConfig& config) {
  validate(data);
  if (config.n_trees < 1) throw ConfigError("n_trees must be positive");
  const int p = static_cast<int>(data.rows.front().size());
  int mtry = config.max_features;
  if (mtry <= 0) mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  mtry = std::min(mtry, p);

  ForestModel model;
  model.manifest_version = data.manifest_version;
  model.feature_names = data.feature_names;
  model.seed = config.seed;
  model.trees.resize(config.n_trees);
  const std::size_t n = data.rows.size();
  parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
    Rng rng = derive_rng(config.seed, t);
    std::vector<int> rows(n);
    for (auto& r : rows) r = static_cast<int>(uniform_index(rng, n));
    TreeBuilder builder(data, mtry, rng);
    model.trees[t] = builder.build(std::move(rows));
  });
  return model;
}

double rf_predict(const ForestModel& model, std::span<const double> features) {
  if (model.trees.empty()) throw ConfigError("forest has no trees");
  if (!model.feature_names.empty() && features.size() != model.feature_names.size())
    throw ShapeError("feature vector length does not match the forest");
  double sum = 0;
  for (const Tree& t : model.trees) sum += leaf_cancer(t, features);
  return sum / static_cast<double>(model.trees.size());
}

double rf_predict(const ForestModel& model, std::span<const double> features,
                  const std::string& manifest_version) {
  if (manifest_version != model.manifest_version)
    throw ConfigError("feature manifest '" + manifest_version + "' does not match forest '" +
                      model.manifest_version + "'");
  return rf_predict(model, features);
}

std::string to_json(const ForestModel& model) {
  nlohmann::json j;
  j["format"] = "ssc-forest-1";
  j["manifest_version"] = model.manifest_version;
  j["feature_names"] = model.feature_names;
  j["seed"] = model.seed;
  j["classes"] = model.classes;
  j["trees"] = nlohmann::json::array();
  for (const Tree& t : model.trees) {
    // Column arrays keep the file compact.
    std::vector<int> feature, left, right;
    std::vector<double> threshold, p1;
    for (const Node& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      p1.push_back(n.feature < 0 ? n.probs[1] : 0.0);
    }
    j["trees"].push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                          {"right", right}, {"p_cancer", p1}});
  }
  return j.dump();
}

ForestModel forest_from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != "ssc-forest-1") throw IoError("unknown forest format");
    ForestModel m;
    m.manifest_version = j.at("manifest_version").get<std::string>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.classes = j.at("classes").get<int>();
    for (const auto& jt : j.at("trees")) {
      auto feature = jt.at("feature").get<std::vector<int>>();
      auto threshold = jt.at("threshold").get<std::vector<double>>();
      auto left = jt.at("left").get<std::vector<int>>();
      auto right = jt.at("right").get<std::vector<int>>();
      auto p1 = jt.at("p_cancer").get<std::vector<double>>();
      const std::size_t n = feature.size();
      if (threshold.size() != n || left.size() != n || right.size() != n || p1.size() != n ||
          n == 0)
        throw IoError("inconsistent tree arrays");
      Tree t;
      for (std::size_t i = 0; i < n; ++i) {
        Node node;
        node.feature = feature[i];
        node.threshold = threshold[i];
        node.left = left[i];
        node.right = right[i];
        if (node.feature < 0) {
          node.probs = {1.0 - p1[i], p1[i]};
        } else if (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                   node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n) ||
                   !std::isfinite(node.threshold)) {
          throw IoError("malformed tree node");
        }
        t.nodes.push_back(std::move(node));
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad forest JSON: ") + e.what());
  }
}

void save_forest(const std::filesystem::path& path, const ForestModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(model) << '\n';
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return forest_from_json(ss.str());
}

std::vector<double> cross_validated_scores(const Dataset& data, int folds,
                                           const ForestConfig& config) {
  validate(data);
  if (folds < 2) throw ConfigError("need at least two folds");
  // Patients are dealt round-robin within their class, in order of first
  // appearance, so every fold keeps the overall class balance.
  auto key = [&](std::size_t i) {
    return i < data.patient_ids.size() ? data.patient_ids[i] : "#" + std::to_string(i);
  };
  std::map<std::string, int> patient_class;
  for (std::size_t i = 0; i < data.size(); ++i)
    patient_class[key(i)] = std::max(patient_class[key(i)], data.labels[i]);
  std::map<std::string, int> fold_of;
  int dealt[2] = {0, 0};
  std::vector<int> row_fold(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto it = fold_of.find(key(i));
    if (it == fold_of.end()) {
      const int cls = patient_class[key(i)];
      it = fold_of.emplace(key(i), dealt[cls]++ % folds).first;
    }
    row_fold[i] = it->second;
  }
  std::vector<double> scores(data.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    Dataset train;
    train.manifest_version = data.manifest_version;
    train.feature_names = data.feature_names;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (row_fold[i] != f) {
        train.rows.push_back(data.rows[i]);
        train.labels.push_back(data.labels[i]);
      }
    if (train.rows.size() == data.size()) continue;
    ForestConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(f) * 7919u;
    ForestModel m = rf_train(train, c);
    for (std::size_t i = 0; i < data.size(); ++i)
      if (row_fold[i] == f) scores[i] = rf_predict(m, data.rows[i]);
  }
  return scores;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  double pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NonFiniteError("non-finite score");
    (labels[i] ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw ConfigError("ROC analysis needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double tp = 0, fp = 0, area = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    double dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? dtp : dfp) += 1;
    // trapezoid in count units; exact for integer counts
    area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({s, fp / neg, tp / pos});
  }
  roc.auc = area / (2 * pos * neg);
  return roc;
}

ConfidenceInterval bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                std::span<const std::string> patient_ids, int n, double level,
                                std::uint64_t seed, int threads) {
  if (scores.size() != labels.size() || scores.size() != patient_ids.size())
    throw ShapeError("bootstrap inputs differ in length");
  if (n < 1) throw ConfigError("bootstrap needs at least one resample");
  if (!(level > 0 && level < 1)) throw ConfigError("confidence level must be in (0, 1)");

  std::map<std::string, std::vector<std::size_t>> slides;
  for (std::size_t i = 0; i < patient_ids.size(); ++i) slides[patient_ids[i]].push_back(i);
  // A patient counts as cancer if any of their slides is.
  std::vector<const std::vector<std::size_t>*> groups[2];
  for (const auto& [id, rows] : slides) {
    int cls = 0;
    for (std::size_t r : rows) cls = std::max(cls, labels[r]);
    groups[cls].push_back(&rows);
  }
  if (groups[0].size() < 2 || groups[1].size() < 2)
    throw ConfigError("bootstrap needs at least two patients per class");

  std::vector<double> aucs(n, std::nan(""));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t b) {
    Rng rng = derive_rng(seed, b);
    for (int attempt = 0; attempt <= 10; ++attempt) {
      std::vector<double> s;
      std::vector<int> l;
      for (const auto& g : groups)
        for (std::size_t k = 0; k < g.size(); ++k)
          for (std::size_t r : *g[uniform_index(rng, g.size())]) {
            s.push_back(scores[r]);
            l.push_back(labels[r]);
          }
      const bool both = std::count(l.begin(), l.end(), 1) > 0 &&
                        std::count(l.begin(), l.end(), 0) > 0;
      if (both) {
        aucs[b] = roc_auc(s, l).auc;
        return;
      }
    }
  });
  std::vector<double> ok;
  for (double a : aucs)
    if (!std::isnan(a)) ok.push_back(a);
  if (ok.empty()) throw DegenerateGeometry("every bootstrap resample lacked a class");
  std::sort(ok.begin(), ok.end());
  auto q = [&](double p) {
    const double h = (ok.size() - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, ok.size() - 1);
    return ok[lo] + (h - lo) * (ok[hi] - ok[lo]);
  };
  const double tail = (1 - level) / 2;
  return {q(tail), q(1 - tail), static_cast<int>(ok.size())};
}

void write_roc_csv(const std::filesystem::path& path, const RocResult& roc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  out.precision(17);
  for (const RocPoint& p : roc.points) {
    if (std::isinf(p.threshold))
      out << "inf";
    else
      out << p.threshold;
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
}

void write_roc_png(const std::filesystem::path& path, const RocResult& roc, int size) {
  if (size < 64) throw ConfigError("ROC plot too small");
  RgbImage img(size, size);
  std::fill(img.data.begin(), img.data.end(), 1.0f);
  auto put = [&](int x, int y, float r, float g, float b) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = b;
  };
  const int m = size / 10;  // margin
  const int span = size - 2 * m;
  auto px = [&](double fpr) { return m + static_cast<int>(std::lround(fpr * span)); };
  auto py = [&](double tpr) { return size - 1 - m - static_cast<int>(std::lround(tpr * span)); };
  auto line = [&](double x0, double y0, double x1, double y1, float r, float g, float b,
                  int width, int dash) {
    const int steps = std::max(1, 2 * span);
    for (int s = 0; s <= steps; ++s) {
      if (dash && (s / dash) % 2) continue;
      const double t = static_cast<double>(s) / steps;
      const int cx = px(x0 + t * (x1 - x0)), cy = py(y0 + t * (y1 - y0));
      for (int dy = -width / 2; dy <= width / 2; ++dy)
        for (int dx = -width / 2; dx <= width / 2; ++dx) put(cx + dx, cy + dy, r, g, b);
    }
  };
  // grid, chance diagonal, axes with ticks every 0.2
  for (int k = 1; k < 5; ++k) {
    line(k * 0.2, 0, k * 0.2, 1, 0.9f, 0.9f, 0.9f, 1, 0);
    line(0, k * 0.2, 1, k * 0.2, 0.9f, 0.9f, 0.9f, 1, 0);
  }
  line(0, 0, 1, 1, 0.6f, 0.6f, 0.6f, 1, 6);
  line(0, 0, 1, 0, 0, 0, 0, 1, 0);
  line(0, 0, 0, 1, 0, 0, 0, 1, 0);
  line(1, 0, 1, 1, 0, 0, 0, 1, 0);
  line(0, 1, 1, 1, 0, 0, 0, 1, 0);
  for (int k = 0; k <= 5; ++k) {
    for (int d = 1; d <= 5; ++d) {
      put(px(k * 0.2), py(0) + d, 0, 0, 0);
      put(px(0) - d, py(k * 0.2), 0, 0, 0);
    }
  }
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const RocPoint& a = roc.points[i - 1];
    const RocPoint& b = roc.points[i];
    line(a.fpr, a.tpr, b.fpr, b.tpr, 0.1f, 0.3f, 0.8f, 3, 0);
  }
  io::write_rgb_png(path, img);
}

}  // namespace ssc::forest
